#include "adapter/adapter.hpp"

#include <cmath>

#include "core/error.hpp"

namespace e2i::adapter {

void AdapterState::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  encoder_copy.visit(prefix + "encoder_copy.", v);
  input_zero_conv.visit(prefix + "input_zero_conv.", v);
  for (std::size_t i = 0; i < output_zero_convs.size(); ++i)
    output_zero_convs[i].visit(prefix + "output_zero_conv" + std::to_string(i) + ".", v);
}

AdapterState clone_encoder(const diffusion::Backbone& backbone, const std::vector<Shape>& declared_shapes) {
  const auto& cfg = backbone.unet_config();
  const auto shapes = diffusion::block_shapes(cfg);
  if (!declared_shapes.empty() && declared_shapes != shapes)
    throw ConfigError("adapter block shapes do not match the backbone architecture");

  // The live encoder must produce what the architecture declares.
  {
    NoGradGuard ng;
    auto acts = backbone.encoder(Tensor::zeros(cfg.latent.as_shape()), backbone.text.embed(""), 1);
    std::vector<Shape> live;
    for (const auto& s : acts.skips) live.push_back(s.shape());
    live.push_back(acts.mid.shape());
    if (live != shapes) throw ConfigError("backbone encoder activations do not match its declared block shapes");
  }

  AdapterState a;
  a.encoder_copy = nn::deep_copy(backbone.encoder);
  nn::set_trainable(a.encoder_copy, true);
  a.input_zero_conv = nn::Conv2d::zero(cfg.latent.channels, cfg.latent.channels);
  for (const auto& s : shapes) a.output_zero_convs.push_back(nn::Conv2d::zero(s[0], s[0]));
  a.backbone_fingerprint = backbone.fingerprint();
  return a;
}

Tensor build_control(const Tensor& z_t, const Tensor& z_eeg, const nn::Conv2d& input_zero_conv) {
  if (z_t.shape() != z_eeg.shape())
    throw ArgumentError("control inputs differ in shape: " + shape_str(z_t.shape()) + " vs " + shape_str(z_eeg.shape()));
  return ops::add(z_t, input_zero_conv(z_eeg));
}

ControlResiduals adapter_forward(const AdapterState& a, const Tensor& c_eeg, const Tensor& caption_embedding, int t,
                                 const diffusion::NoiseSchedule& schedule) {
  schedule.check_t(t);
  auto acts = a.encoder_copy(c_eeg, caption_embedding, t);
  if (acts.blocks() != a.output_zero_convs.size()) throw InternalError("adapter has the wrong number of zero convs");
  ControlResiduals r;
  for (std::size_t i = 0; i < acts.skips.size(); ++i) r.maps.push_back(a.output_zero_convs[i](acts.skips[i]));
  r.maps.push_back(a.output_zero_convs.back()(acts.mid));
  r.scales.assign(r.maps.size(), 1.0);
  return r;
}

void inject_residuals(diffusion::EncoderOutput& acts, const ControlResiduals& residuals) {
  if (residuals.maps.size() != acts.blocks() || residuals.scales.size() != residuals.maps.size())
    throw InternalError("residual count " + std::to_string(residuals.maps.size()) + " does not match " +
                        std::to_string(acts.blocks()) + " backbone blocks");
  auto apply = [](Tensor& act, const Tensor& res, double s) {
    if (act.shape() != res.shape())
      throw InternalError("residual shape " + shape_str(res.shape()) + " does not match activation " +
                          shape_str(act.shape()));
    if (s != 0.0) act = ops::add(act, s == 1.0 ? res : ops::scale(res, s));
  };
  for (std::size_t i = 0; i < acts.skips.size(); ++i) apply(acts.skips[i], residuals.maps[i], residuals.scales[i]);
  apply(acts.mid, residuals.maps.back(), residuals.scales.back());
}

std::vector<double> guess_mode_scales(std::size_t blocks) {
  if (blocks == 0) return {};
  if (blocks == 1) return {1.0};
  std::vector<double> s(blocks);
  const double k = static_cast<double>(blocks - 1);
  for (std::size_t i = 0; i < blocks; ++i) s[i] = std::pow(0.1, (k - static_cast<double>(i)) / k);
  return s;
}

}  // namespace e2i::adapter
