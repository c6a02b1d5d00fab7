#include "core/nn.hpp"

#include <cmath>

#include "core/error.hpp"

namespace e2i::nn {

Tensor init_uniform(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::param(std::move(shape), std::move(v));
}

Conv2d Conv2d::make(int ci, int co, int k, int stride, int pad, Rng& rng) {
  const int fan_in = ci * k * k;
  Conv2d c;
  c.weight = init_uniform({co, ci, k, k}, fan_in, rng);
  c.bias = init_uniform({co}, fan_in, rng);
  c.geom = {stride, stride, pad, pad};
  return c;
}

Conv2d Conv2d::zero(int ci, int co) {
  Conv2d c;
  c.weight = Tensor::param({co, ci, 1, 1}, std::vector<double>(static_cast<std::size_t>(co) * ci));
  c.bias = Tensor::param({co}, std::vector<double>(static_cast<std::size_t>(co)));
  return c;
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "weight", weight);
  v(prefix + "bias", bias);
}

Conv1d Conv1d::make(int ci, int co, int k, int stride, int pad, Rng& rng) {
  const int fan_in = ci * k;
  Conv1d c;
  c.weight = init_uniform({co, ci, k}, fan_in, rng);
  c.bias = init_uniform({co}, fan_in, rng);
  c.stride = stride;
  c.pad = pad;
  return c;
}

void Conv1d::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "weight", weight);
  v(prefix + "bias", bias);
}

Linear Linear::make(int in, int out, Rng& rng) {
  Linear l;
  l.weight = init_uniform({out, in}, in, rng);
  l.bias = init_uniform({out}, in, rng);
  return l;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "weight", weight);
  v(prefix + "bias", bias);
}

GroupNorm GroupNorm::make(int channels, int groups) {
  if (channels % groups != 0)
    throw ConfigError("group norm: " + std::to_string(channels) + " channels, " +
                      std::to_string(groups) + " groups");
  GroupNorm g;
  g.gamma = Tensor::param({channels}, std::vector<double>(static_cast<std::size_t>(channels), 1.0));
  g.beta = Tensor::param({channels}, std::vector<double>(static_cast<std::size_t>(channels), 0.0));
  g.groups = groups;
  return g;
}

void GroupNorm::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "gamma", gamma);
  v(prefix + "beta", beta);
}

ResBlock ResBlock::make(int ci, int co, int time_dim, int groups, Rng& rng) {
  ResBlock r;
  r.norm1 = GroupNorm::make(ci, groups);
  r.conv1 = Conv2d::make(ci, co, 3, 1, 1, rng);
  r.time_proj = Linear::make(time_dim, co, rng);
  r.norm2 = GroupNorm::make(co, groups);
  r.conv2 = Conv2d::make(co, co, 3, 1, 1, rng);
  if (ci != co) r.skip = Conv2d::make(ci, co, 1, 1, 0, rng);
  return r;
}

Tensor ResBlock::operator()(const Tensor& x, const Tensor& temb) const {
  Tensor h = conv1(ops::silu(norm1(x)));
  h = ops::add_channel_bias(h, time_proj(ops::silu(temb)));
  h = conv2(ops::silu(norm2(h)));
  return ops::add(skip ? (*skip)(x) : x, h);
}

void ResBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  norm1.visit(prefix + "norm1.", v);
  conv1.visit(prefix + "conv1.", v);
  time_proj.visit(prefix + "time_proj.", v);
  norm2.visit(prefix + "norm2.", v);
  conv2.visit(prefix + "conv2.", v);
  if (skip) skip->visit(prefix + "skip.", v);
}

CrossAttention CrossAttention::make(int channels, int context_dim, int groups, Rng& rng) {
  CrossAttention a;
  a.norm = GroupNorm::make(channels, groups);
  a.to_q = Linear::make(channels, channels, rng);
  a.to_k = Linear::make(context_dim, channels, rng);
  a.to_v = Linear::make(context_dim, channels, rng);
  a.to_out = Linear::make(channels, channels, rng);
  return a;
}

Tensor CrossAttention::operator()(const Tensor& x, const Tensor& context) const {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  // [C, H*W] -> [H*W, C] rows are spatial positions.
  Tensor tokens = ops::transpose(ops::reshape(norm(x), {c, h * w}));
  Tensor q = to_q(tokens);
  Tensor k = to_k(context);
  Tensor v = to_v(context);
  Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(double(c)));
  Tensor attended = to_out(ops::matmul(ops::softmax_rows(scores), v));
  Tensor back = ops::reshape(ops::transpose(attended), {c, h, w});
  return ops::add(x, back);
}

void CrossAttention::visit(const std::string& prefix, const ParamVisitor& v) {
  norm.visit(prefix + "norm.", v);
  to_q.visit(prefix + "to_q.", v);
  to_k.visit(prefix + "to_k.", v);
  to_v.visit(prefix + "to_v.", v);
  to_out.visit(prefix + "to_out.", v);
}

Tensor timestep_features(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> f(static_cast<std::size_t>(dim), 0.0);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    f[i] = std::cos(t * freq);
    f[half + i] = std::sin(t * freq);
  }
  return Tensor::from({1, dim}, std::move(f));
}

std::size_t count_values(const NamedParams& ps) {
  std::size_t n = 0;
  for (const auto& [_, t] : ps) n += t.numel();
  return n;
}

}  // namespace e2i::nn
