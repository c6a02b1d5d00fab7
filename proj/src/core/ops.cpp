#include "core/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace e2i::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

MapM as_mat(std::vector<double>& v, int rows, int cols) { return MapM(v.data(), rows, cols); }
// Eigen peels unaligned leading elements before its vector loops, so a
// product over mapped heap buffers can round differently depending on where
// the allocator placed them. Copying into Eigen-owned aligned storage keeps
// results bitwise reproducible across runs.
template <class A, class B>
RowMat prod(const A& a, const B& b) {
  const RowMat x = a, y = b;
  RowMat out = x * y;
  return out;
}

CMapM as_mat(const std::vector<double>& v, int rows, int cols) {
  return CMapM(v.data(), rows, cols);
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw InternalError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}

// Adds src into parent grad if the parent takes gradients.
Node* grad_target(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

template <class F>
Tensor unary(const Tensor& x, F f, std::function<void(Node&)> bw) {
  std::vector<double> out(x.numel());
  const auto& in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, std::move(bw));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (Node* p = grad_target(self, k)) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mul");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double v) { return v * s; }, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_n(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw InternalError("add_n of nothing");
  Tensor acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& v) {
  const int c = x.dim(0);
  if (static_cast<int>(v.numel()) != c)
    throw InternalError("add_channel_bias: " + shape_str(v.shape()) + " vs " +
                        shape_str(x.shape()));
  const std::size_t inner = x.numel() / static_cast<std::size_t>(c);
  std::vector<double> out(x.values());
  const auto& vv = v.values();
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < inner; ++i) out[ch * inner + i] += vv[ch];
  return make_result(x.shape(), std::move(out), {x, v}, [c, inner](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double s = 0;
        for (std::size_t i = 0; i < inner; ++i) s += self.grad[ch * inner + i];
        g[ch] += s;
      }
    }
  });
}

Tensor silu(const Tensor& x) {
  return unary(x, [](double v) { return v / (1.0 + std::exp(-v)); }, [](Node& self) {
    const auto& in = self.parents[0]->value;
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in[i]));
      g[i] += self.grad[i] * s * (1.0 + in[i] * (1.0 - s));
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw InternalError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return make_result(std::move(shape), x.values(), {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  if (x.ndim() != 2) throw InternalError("transpose needs 2-D, got " + shape_str(x.shape()));
  const int n = x.dim(0), m = x.dim(1);
  std::vector<double> out(x.numel());
  as_mat(out, m, n) = as_mat(x.values(), n, m).transpose();
  return make_result({m, n}, std::move(out), {x}, [n, m](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    as_mat(g, n, m) += as_mat(self.grad, m, n).transpose();
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw InternalError("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n) * m);
  as_mat(out, n, m) = prod(as_mat(a.values(), n, k), as_mat(b.values(), k, m));
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    auto dy = as_mat(self.grad, n, m);
    if (Node* p = grad_target(self, 0))
      as_mat(p->ensure_grad(), n, k) +=
          prod(dy, as_mat(self.parents[1]->value, k, m).transpose());
    if (Node* p = grad_target(self, 1))
      as_mat(p->ensure_grad(), k, m) +=
          prod(as_mat(self.parents[0]->value, n, k).transpose(), dy);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1))
    throw InternalError("linear " + shape_str(x.shape()) + " with " + shape_str(w.shape()));
  const int n = x.dim(0), in = x.dim(1), out_f = w.dim(0);
  std::vector<double> out(static_cast<std::size_t>(n) * out_f);
  auto y = as_mat(out, n, out_f);
  y = prod(as_mat(x.values(), n, in), as_mat(w.values(), out_f, in).transpose());
  std::vector<Tensor> parents{x, w};
  if (b) {
    if (static_cast<int>(b->numel()) != out_f) throw InternalError("linear bias size");
    const auto& bv = b->values();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < out_f; ++c) y(r, c) += bv[c];
    parents.push_back(*b);
  }
  return make_result({n, out_f}, std::move(out), std::move(parents),
                     [n, in, out_f](Node& self) {
                       auto dy = as_mat(self.grad, n, out_f);
                       if (Node* p = grad_target(self, 0))
                         as_mat(p->ensure_grad(), n, in) +=
                             prod(dy, as_mat(self.parents[1]->value, out_f, in));
                       if (Node* p = grad_target(self, 1))
                         as_mat(p->ensure_grad(), out_f, in) +=
                             prod(dy.transpose(), as_mat(self.parents[0]->value, n, in));
                       if (self.parents.size() > 2)
                         if (Node* p = grad_target(self, 2)) {
                           auto& g = p->ensure_grad();
                           for (int r = 0; r < n; ++r)
                             for (int c = 0; c < out_f; ++c) g[c] += dy(r, c);
                         }
                     });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() != 2) throw InternalError("softmax_rows needs 2-D");
  const int n = x.dim(0), m = x.dim(1);
  std::vector<double> out(x.values());
  for (int r = 0; r < n; ++r) {
    double* row = out.data() + static_cast<std::size_t>(r) * m;
    const double mx = *std::max_element(row, row + m);
    double s = 0;
    for (int c = 0; c < m; ++c) s += (row[c] = std::exp(row[c] - mx));
    for (int c = 0; c < m; ++c) row[c] /= s;
  }
  return make_result(x.shape(), std::move(out), {x}, [n, m](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int r = 0; r < n; ++r) {
      const std::size_t o = static_cast<std::size_t>(r) * m;
      double dot = 0;
      for (int c = 0; c < m; ++c) dot += self.grad[o + c] * self.value[o + c];
      for (int c = 0; c < m; ++c) g[o + c] += self.value[o + c] * (self.grad[o + c] - dot);
    }
  });
}

int conv_out_len(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

namespace {

struct ConvDims {
  int ci, h, w, co, kh, kw, ho, wo;
  Conv2dGeom g;
  bool pointwise() const {
    return kh == 1 && kw == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
           g.pad_w == 0;
  }
  int krows() const { return ci * kh * kw; }
  int positions() const { return ho * wo; }
};

void im2col(const double* x, const ConvDims& d, double* col) {
  const int p = d.positions();
  for (int c = 0; c < d.ci; ++c)
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        double* dst = col + static_cast<std::size_t>((c * d.kh + ky) * d.kw + kx) * p;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * d.g.stride_h - d.g.pad_h + ky;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * d.g.stride_w - d.g.pad_w + kx;
            dst[oy * d.wo + ox] = (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                                      ? x[(static_cast<std::size_t>(c) * d.h + iy) * d.w + ix]
                                      : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, const ConvDims& d, double* dx) {
  const int p = d.positions();
  for (int c = 0; c < d.ci; ++c)
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* src = col + static_cast<std::size_t>((c * d.kh + ky) * d.kw + kx) * p;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * d.g.stride_h - d.g.pad_h + ky;
          if (iy < 0 || iy >= d.h) continue;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * d.g.stride_w - d.g.pad_w + kx;
            if (ix >= 0 && ix < d.w)
              dx[(static_cast<std::size_t>(c) * d.h + iy) * d.w + ix] += src[oy * d.wo + ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b, Conv2dGeom g) {
  if (x.ndim() != 3 || w.ndim() != 4 || x.dim(0) != w.dim(1))
    throw InternalError("conv2d input " + shape_str(x.shape()) + " weight " +
                        shape_str(w.shape()));
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), w.dim(3), 0, 0, g};
  d.ho = conv_out_len(d.h, d.kh, g.stride_h, g.pad_h);
  d.wo = conv_out_len(d.w, d.kw, g.stride_w, g.pad_w);
  if (d.ho < 1 || d.wo < 1)
    throw ArgumentError("conv2d output would be empty for input " + shape_str(x.shape()));

  const int p = d.positions(), kr = d.krows();
  auto col = std::make_shared<std::vector<double>>();
  const double* colp = x.values().data();
  if (!d.pointwise()) {
    col->resize(static_cast<std::size_t>(kr) * p);
    im2col(x.values().data(), d, col->data());
    colp = col->data();
  }
  std::vector<double> out(static_cast<std::size_t>(d.co) * p);
  auto y = as_mat(out, d.co, p);
  y = prod(as_mat(w.values(), d.co, kr), CMapM(colp, kr, p));
  std::vector<Tensor> parents{x, w};
  if (b) {
    const auto& bv = b->values();
    for (int c = 0; c < d.co; ++c) y.row(c).array() += bv[c];
    parents.push_back(*b);
  }
  return make_result({d.co, d.ho, d.wo}, std::move(out), std::move(parents),
                     [d, col](Node& self) {
                       const int p = d.positions(), kr = d.krows();
                       CMapM dy(self.grad.data(), d.co, p);
                       const double* colp =
                           d.pointwise() ? self.parents[0]->value.data() : col->data();
                       if (Node* pw = grad_target(self, 1))
                         as_mat(pw->ensure_grad(), d.co, kr) +=
                             prod(dy, CMapM(colp, kr, p).transpose());
                       if (self.parents.size() > 2)
                         if (Node* pb = grad_target(self, 2)) {
                           auto& gb = pb->ensure_grad();
                           for (int c = 0; c < d.co; ++c) {
                             // Plain loop: Eigen's vectorized sum over a mapped
                             // row rounds differently with the row's alignment.
                             const double* r = self.grad.data() + static_cast<std::size_t>(c) * p;
                             double acc = 0;
                             for (int i = 0; i < p; ++i) acc += r[i];
                             gb[c] += acc;
                           }
                         }
                       if (Node* px = grad_target(self, 0)) {
                         auto wt = as_mat(self.parents[1]->value, d.co, kr);
                         auto& gx = px->ensure_grad();
                         if (d.pointwise()) {
                           as_mat(gx, kr, p) += prod(wt.transpose(), dy);
                         } else {
                           std::vector<double> dcol(static_cast<std::size_t>(kr) * p);
                           as_mat(dcol, kr, p) = prod(wt.transpose(), dy);
                           col2im_add(dcol.data(), d, gx.data());
                         }
                       }
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b, int stride,
              int pad) {
  if (x.ndim() != 2 || w.ndim() != 3)
    throw InternalError("conv1d input " + shape_str(x.shape()) + " weight " +
                        shape_str(w.shape()));
  Tensor x3 = reshape(x, {x.dim(0), 1, x.dim(1)});
  Tensor w4 = reshape(w, {w.dim(0), w.dim(1), 1, w.dim(2)});
  Tensor y = conv2d(x3, w4, b, Conv2dGeom{1, stride, 0, pad});
  return reshape(y, {y.dim(0), y.dim(2)});
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const int c = x.dim(0);
  if (c % groups != 0) throw InternalError("group_norm: channels not divisible by groups");
  const std::size_t inner = x.numel() / static_cast<std::size_t>(c);
  const int cpg = c / groups;
  const std::size_t gsize = inner * static_cast<std::size_t>(cpg);
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(groups);
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (int gi = 0; gi < groups; ++gi) {
    const std::size_t o = gi * gsize;
    double mu = 0;
    for (std::size_t i = 0; i < gsize; ++i) mu += xv[o + i];
    mu /= static_cast<double>(gsize);
    double var = 0;
    for (std::size_t i = 0; i < gsize; ++i) var += (xv[o + i] - mu) * (xv[o + i] - mu);
    var /= static_cast<double>(gsize);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[gi] = is;
    for (std::size_t i = 0; i < gsize; ++i) {
      const double xh = (xv[o + i] - mu) * is;
      (*xhat)[o + i] = xh;
      const int ch = static_cast<int>((o + i) / inner);
      out[o + i] = gv[ch] * xh + bv[ch];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [=](Node& self) {
                       const auto& gv = self.parents[1]->value;
                       if (Node* p = grad_target(self, 1)) {
                         auto& g = p->ensure_grad();
                         for (std::size_t i = 0; i < xhat->size(); ++i)
                           g[i / inner] += self.grad[i] * (*xhat)[i];
                       }
                       if (Node* p = grad_target(self, 2)) {
                         auto& g = p->ensure_grad();
                         for (std::size_t i = 0; i < xhat->size(); ++i)
                           g[i / inner] += self.grad[i];
                       }
                       if (Node* p = grad_target(self, 0)) {
                         auto& g = p->ensure_grad();
                         const double n = static_cast<double>(gsize);
                         for (int gi = 0; gi < groups; ++gi) {
                           const std::size_t o = gi * gsize;
                           double s1 = 0, s2 = 0;
                           for (std::size_t i = 0; i < gsize; ++i) {
                             const double dxh = self.grad[o + i] * gv[(o + i) / inner];
                             s1 += dxh;
                             s2 += dxh * (*xhat)[o + i];
                           }
                           const double is = (*inv_std)[gi];
                           for (std::size_t i = 0; i < gsize; ++i) {
                             const double dxh = self.grad[o + i] * gv[(o + i) / inner];
                             g[o + i] += is / n * (n * dxh - s1 - (*xhat)[o + i] * s2);
                           }
                         }
                       }
                     });
}

Tensor concat0(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim()) throw InternalError("concat0 rank mismatch");
  for (int i = 1; i < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i))
      throw InternalError("concat0 " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  Shape s = a.shape();
  s[0] += b.dim(0);
  std::vector<double> out(a.values());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.numel();
  return make_result(std::move(s), std::move(out), {a, b}, [na](Node& self) {
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) g[i] += self.grad[i];
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
    }
  });
}

Tensor slice0(const Tensor& x, int start, int len) {
  if (start < 0 || len < 1 || start + len > x.dim(0))
    throw InternalError("slice0 out of range on " + shape_str(x.shape()));
  const std::size_t inner = x.numel() / static_cast<std::size_t>(x.dim(0));
  Shape s = x.shape();
  s[0] = len;
  const std::size_t off = inner * static_cast<std::size_t>(start);
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(off),
                          x.values().begin() + static_cast<std::ptrdiff_t>(off + inner * len));
  return make_result(std::move(s), std::move(out), {x}, [off](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& rows) {
  if (table.ndim() != 2 || rows.empty()) throw InternalError("gather_rows needs a 2-D table and indices");
  const int v = table.dim(0), d = table.dim(1);
  std::vector<double> out(rows.size() * static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= v) throw InternalError("gather_rows index out of range");
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(rows[r]) * d, d, out.begin() + r * d);
  }
  return make_result({static_cast<int>(rows.size()), d}, std::move(out), {table}, [rows, d](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (int c = 0; c < d; ++c) g[static_cast<std::size_t>(rows[r]) * d + c] += self.grad[r * d + c];
  });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  if (x.ndim() != 2 || start < 0 || len < 1 || start + len > x.dim(1))
    throw InternalError("slice_cols out of range on " + shape_str(x.shape()));
  const int n = x.dim(0), m = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n) * len);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < len; ++c) out[r * len + c] = x.values()[r * m + start + c];
  return make_result({n, len}, std::move(out), {x}, [n, m, start, len](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < len; ++c) g[r * m + start + c] += self.grad[r * len + c];
  });
}

Tensor upsample_nearest(const Tensor& x, int f) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h * f, wo = w * f;
  std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
  const auto& xv = x.values();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx)
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] =
            xv[(static_cast<std::size_t>(ch) * h + y / f) * w + xx / f];
  return make_result({c, ho, wo}, std::move(out), {x}, [=](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx)
          g[(static_cast<std::size_t>(ch) * h + y / f) * w + xx / f] +=
              self.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx];
  });
}

Tensor pad_reshape(const Tensor& x, const Shape& target) {
  const std::size_t n = shape_numel(target);
  const std::size_t keep = std::min(n, x.numel());
  std::vector<double> out(n, 0.0);
  std::copy_n(x.values().begin(), keep, out.begin());
  return make_result(target, std::move(out), {x}, [keep](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < keep; ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mse");
  const auto& av = a.values();
  const auto& bv = b.values();
  const double n = static_cast<double>(av.size());
  double s = 0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return make_result({1}, {s / n}, {a, b}, [n](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const double k = 2.0 * self.grad[0] / n;
    if (Node* p = grad_target(self, 0)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (av[i] - bv[i]);
    }
    if (Node* p = grad_target(self, 1)) {
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (av[i] - bv[i]);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, int label) {
  const auto& z = logits.values();
  const int k = static_cast<int>(z.size());
  if (label < 0 || label >= k) throw InternalError("cross_entropy label out of range");
  const double mx = *std::max_element(z.begin(), z.end());
  auto probs = std::make_shared<std::vector<double>>(k);
  double s = 0;
  for (int i = 0; i < k; ++i) s += ((*probs)[i] = std::exp(z[i] - mx));
  for (auto& p : *probs) p /= s;
  const double loss = -(z[label] - mx - std::log(s));
  return make_result({1}, {loss}, {logits}, [probs, label](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[0] * ((*probs)[i] - (static_cast<int>(i) == label ? 1.0 : 0.0));
  });
}

}  // namespace e2i::ops
