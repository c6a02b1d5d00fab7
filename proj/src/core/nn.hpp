#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace e2i::nn {

using ParamVisitor = std::function<void(const std::string& name, Tensor& t)>;
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(Shape shape, int fan_in, Rng& rng);

struct Conv2d {
  Tensor weight;  // [Co, Ci, k, k]
  Tensor bias;    // [Co]
  ops::Conv2dGeom geom;

  static Conv2d make(int ci, int co, int k, int stride, int pad, Rng& rng);
  // 1x1 convolution with all weights and biases exactly zero.
  static Conv2d zero(int ci, int co);

  Tensor operator()(const Tensor& x) const { return ops::conv2d(x, weight, bias, geom); }
  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct Conv1d {
  Tensor weight;  // [Co, Ci, k]
  Tensor bias;
  int stride = 1;
  int pad = 0;

  static Conv1d make(int ci, int co, int k, int stride, int pad, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ops::conv1d(x, weight, bias, stride, pad); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct Linear {
  Tensor weight;  // [Out, In]
  Tensor bias;    // [Out]

  static Linear make(int in, int out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct GroupNorm {
  Tensor gamma, beta;
  int groups = 1;

  static GroupNorm make(int channels, int groups);
  Tensor operator()(const Tensor& x) const { return ops::group_norm(x, groups, gamma, beta); }
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// GN -> SiLU -> conv, + time projection, GN -> SiLU -> conv, + skip.
struct ResBlock {
  GroupNorm norm1;
  Conv2d conv1;
  Linear time_proj;
  GroupNorm norm2;
  Conv2d conv2;
  std::optional<Conv2d> skip;

  static ResBlock make(int ci, int co, int time_dim, int groups, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& temb) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Single-head cross attention from spatial queries to context tokens, with
// a residual connection.
struct CrossAttention {
  GroupNorm norm;
  Linear to_q, to_k, to_v, to_out;

  static CrossAttention make(int channels, int context_dim, int groups, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& context) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Sinusoidal features of a scalar timestep, [1, dim].
Tensor timestep_features(double t, int dim);

template <class M>
NamedParams collect(M& m, const std::string& prefix = "") {
  NamedParams out;
  m.visit(prefix, [&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
  return out;
}

template <class M>
void set_trainable(M& m, bool on) {
  m.visit("", [on](const std::string&, Tensor& t) { t.set_requires_grad(on); });
}

// Copy whose parameters are fresh leaves holding the same values.
template <class M>
M deep_copy(const M& m) {
  M c = m;
  c.visit("", [](const std::string&, Tensor& t) { t = t.clone_leaf(); });
  return c;
}

template <class M>
void zero_grad(M& m) {
  m.visit("", [](const std::string&, Tensor& t) { t.zero_grad(); });
}

std::size_t count_values(const NamedParams& ps);

}  // namespace e2i::nn
