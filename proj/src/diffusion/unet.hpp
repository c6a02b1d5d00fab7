#pragma once

#include <vector>

#include "core/nn.hpp"
#include "projection/projection.hpp"

namespace e2i::diffusion {

struct UNetConfig {
  projection::LatentShape latent{4, 8, 8};
  int base_width = 32;
  int time_dim = 128;
  int context_dim = 32;
  int groups = 8;
  bool operator==(const UNetConfig&) const = default;
};

// Activations the encoder hands to the decoder: the skip connections in
// forward order, the bottleneck, and the time embedding.
struct EncoderOutput {
  std::vector<Tensor> skips;
  Tensor mid;
  Tensor temb;

  // Number of injection points (skips plus bottleneck).
  std::size_t blocks() const { return skips.size() + 1; }
};

// Encoder half: time embedding, input conv, two resolutions, bottleneck.
struct UNetEncoder {
  UNetConfig config;
  nn::Linear time1, time2;
  nn::Conv2d conv_in;
  nn::ResBlock res1;
  nn::CrossAttention attn1;
  nn::Conv2d down;
  nn::ResBlock res2;
  nn::CrossAttention attn2;
  nn::ResBlock mid1;
  nn::CrossAttention mid_attn;
  nn::ResBlock mid2;

  static UNetEncoder make(const UNetConfig& cfg, Rng& rng);
  Tensor time_embedding(double t) const;
  EncoderOutput operator()(const Tensor& x, const Tensor& context, double t) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

struct UNetDecoder {
  UNetConfig config;
  nn::ResBlock up3, up2;
  nn::CrossAttention up_attn3;
  nn::Conv2d up_conv;
  nn::ResBlock up1, up0;
  nn::CrossAttention up_attn1;
  nn::GroupNorm norm_out;
  nn::Conv2d conv_out;

  static UNetDecoder make(const UNetConfig& cfg, Rng& rng);
  Tensor operator()(const EncoderOutput& enc, const Tensor& context) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

// Shapes of the encoder's skip and bottleneck activations, in injection order.
std::vector<Shape> block_shapes(const UNetConfig& cfg);

}  // namespace e2i::diffusion
