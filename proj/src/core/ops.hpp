#pragma once

#include <optional>

#include "core/tensor.hpp"

// Differentiable ops over single-sample tensors. Batches are handled by the
// callers as loops with gradient accumulation.
namespace e2i::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_n(const std::vector<Tensor>& xs);

// x[C, ...] + v[C] broadcast over the trailing dims. v may also be [1, C].
Tensor add_channel_bias(const Tensor& x, const Tensor& v);

Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // [N, M] -> [M, N]

// a[N, K] x b[K, M]
Tensor matmul(const Tensor& a, const Tensor& b);
// x[N, In] w[Out, In]^T + b[Out]
Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b);
Tensor softmax_rows(const Tensor& x);

struct Conv2dGeom {
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
};
// x[Ci, H, W], w[Co, Ci, kh, kw], b[Co]
Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b, Conv2dGeom g);
// x[Ci, L], w[Co, Ci, k], b[Co]
Tensor conv1d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b, int stride,
              int pad);

// Output length of a strided convolution along one axis.
int conv_out_len(int in, int kernel, int stride, int pad);

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat0(const Tensor& a, const Tensor& b);
// Rows [start, start+len) along dim 0.
Tensor slice0(const Tensor& x, int start, int len);
// Columns [start, start+len) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, int start, int len);
// Rows of table[V, D] picked by index, [n, D].
Tensor gather_rows(const Tensor& table, const std::vector<int>& rows);
Tensor upsample_nearest(const Tensor& x, int factor);  // [C, H, W]

// Row-major flatten, then zero-pad or truncate to numel(target), then reshape.
Tensor pad_reshape(const Tensor& x, const Shape& target);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);
// Scalar cross entropy of logits (any shape with K elements) against a class.
Tensor cross_entropy(const Tensor& logits, int label);

}  // namespace e2i::ops
