#include "diffusion/unet.hpp"

#include "core/error.hpp"

namespace e2i::diffusion {

namespace {

void check_config(const UNetConfig& c) {
  if (c.latent.height % 2 != 0 || c.latent.width % 2 != 0)
    throw ConfigError("UNet latent height and width must be even");
  if (c.base_width % c.groups != 0) throw ConfigError("UNet base width must be divisible by the group count");
}

}  // namespace

UNetEncoder UNetEncoder::make(const UNetConfig& cfg, Rng& rng) {
  check_config(cfg);
  const int w = cfg.base_width, w2 = 2 * cfg.base_width;
  UNetEncoder e;
  e.config = cfg;
  e.time1 = nn::Linear::make(cfg.base_width, cfg.time_dim, rng);
  e.time2 = nn::Linear::make(cfg.time_dim, cfg.time_dim, rng);
  e.conv_in = nn::Conv2d::make(cfg.latent.channels, w, 3, 1, 1, rng);
  e.res1 = nn::ResBlock::make(w, w, cfg.time_dim, cfg.groups, rng);
  e.attn1 = nn::CrossAttention::make(w, cfg.context_dim, cfg.groups, rng);
  e.down = nn::Conv2d::make(w, w, 3, 2, 1, rng);
  e.res2 = nn::ResBlock::make(w, w2, cfg.time_dim, cfg.groups, rng);
  e.attn2 = nn::CrossAttention::make(w2, cfg.context_dim, cfg.groups, rng);
  e.mid1 = nn::ResBlock::make(w2, w2, cfg.time_dim, cfg.groups, rng);
  e.mid_attn = nn::CrossAttention::make(w2, cfg.context_dim, cfg.groups, rng);
  e.mid2 = nn::ResBlock::make(w2, w2, cfg.time_dim, cfg.groups, rng);
  return e;
}

Tensor UNetEncoder::time_embedding(double t) const {
  return time2(ops::silu(time1(nn::timestep_features(t, config.base_width))));
}

EncoderOutput UNetEncoder::operator()(const Tensor& x, const Tensor& context, double t) const {
  if (x.shape() != config.latent.as_shape())
    throw ArgumentError("UNet expects latent " + shape_str(config.latent.as_shape()) + ", got " + shape_str(x.shape()));
  EncoderOutput out;
  out.temb = time_embedding(t);
  Tensor h = conv_in(x);
  out.skips.push_back(h);
  h = attn1(res1(h, out.temb), context);
  out.skips.push_back(h);
  h = down(h);
  out.skips.push_back(h);
  h = attn2(res2(h, out.temb), context);
  out.skips.push_back(h);
  out.mid = mid2(mid_attn(mid1(h, out.temb), context), out.temb);
  return out;
}

void UNetEncoder::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  time1.visit(prefix + "time1.", v);
  time2.visit(prefix + "time2.", v);
  conv_in.visit(prefix + "conv_in.", v);
  res1.visit(prefix + "res1.", v);
  attn1.visit(prefix + "attn1.", v);
  down.visit(prefix + "down.", v);
  res2.visit(prefix + "res2.", v);
  attn2.visit(prefix + "attn2.", v);
  mid1.visit(prefix + "mid1.", v);
  mid_attn.visit(prefix + "mid_attn.", v);
  mid2.visit(prefix + "mid2.", v);
}

UNetDecoder UNetDecoder::make(const UNetConfig& cfg, Rng& rng) {
  check_config(cfg);
  const int w = cfg.base_width, w2 = 2 * cfg.base_width;
  UNetDecoder d;
  d.config = cfg;
  d.up3 = nn::ResBlock::make(w2 + w2, w2, cfg.time_dim, cfg.groups, rng);
  d.up_attn3 = nn::CrossAttention::make(w2, cfg.context_dim, cfg.groups, rng);
  d.up2 = nn::ResBlock::make(w2 + w, w2, cfg.time_dim, cfg.groups, rng);
  d.up_conv = nn::Conv2d::make(w2, w2, 3, 1, 1, rng);
  d.up1 = nn::ResBlock::make(w2 + w, w, cfg.time_dim, cfg.groups, rng);
  d.up_attn1 = nn::CrossAttention::make(w, cfg.context_dim, cfg.groups, rng);
  d.up0 = nn::ResBlock::make(w + w, w, cfg.time_dim, cfg.groups, rng);
  d.norm_out = nn::GroupNorm::make(w, cfg.groups);
  d.conv_out = nn::Conv2d::make(w, cfg.latent.channels, 3, 1, 1, rng);
  return d;
}

Tensor UNetDecoder::operator()(const EncoderOutput& enc, const Tensor& context) const {
  if (enc.skips.size() != 4) throw InternalError("UNet decoder expects four skip activations");
  const auto& s = enc.skips;
  Tensor h = up_attn3(up3(ops::concat0(enc.mid, s[3]), enc.temb), context);
  h = up2(ops::concat0(h, s[2]), enc.temb);
  h = up_conv(ops::upsample_nearest(h, 2));
  h = up_attn1(up1(ops::concat0(h, s[1]), enc.temb), context);
  h = up0(ops::concat0(h, s[0]), enc.temb);
  return conv_out(ops::silu(norm_out(h)));
}

void UNetDecoder::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  up3.visit(prefix + "up3.", v);
  up_attn3.visit(prefix + "up_attn3.", v);
  up2.visit(prefix + "up2.", v);
  up_conv.visit(prefix + "up_conv.", v);
  up1.visit(prefix + "up1.", v);
  up_attn1.visit(prefix + "up_attn1.", v);
  up0.visit(prefix + "up0.", v);
  norm_out.visit(prefix + "norm_out.", v);
  conv_out.visit(prefix + "conv_out.", v);
}

std::vector<Shape> block_shapes(const UNetConfig& cfg) {
  const int w = cfg.base_width, w2 = 2 * cfg.base_width;
  const int h = cfg.latent.height, wd = cfg.latent.width;
  return {{w, h, wd}, {w, h, wd}, {w, h / 2, wd / 2}, {w2, h / 2, wd / 2}, {w2, h / 2, wd / 2}};
}

}  // namespace e2i::diffusion
