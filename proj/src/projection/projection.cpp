#include "projection/projection.hpp"

#include "core/error.hpp"

namespace e2i::projection {

void ProjectionConfig::validate() const {
  if (channel_widths.empty() || channel_widths.size() != strides.size())
    throw ConfigError("projection: channel_widths and strides must be non-empty and of equal length");
  for (int w : channel_widths)
    if (w < 1) throw ConfigError("projection: channel widths must be positive");
  for (int s : strides)
    if (s < 1) throw ConfigError("projection: strides must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("projection: kernel size must be odd and positive");
  if (in_channels < 1) throw ConfigError("projection: in_channels must be positive");
  if (target.channels < 1 || target.height < 1 || target.width < 1)
    throw ConfigError("projection: target latent shape must be positive");
  if (min_length < 1) throw ConfigError("projection: min_length must be positive");
  try {
    check_length(*this, min_length);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("projection infeasible: ") + e.what());
  }
}

std::vector<int> layer_lengths(const ProjectionConfig& cfg, int length) {
  std::vector<int> out{length};
  for (int s : cfg.strides) out.push_back(ops::conv_out_len(out.back(), cfg.kernel_size, s, cfg.padding()));
  return out;
}

void check_length(const ProjectionConfig& cfg, int length) {
  int l = length;
  for (std::size_t i = 0; i < cfg.strides.size(); ++i) {
    if (l / cfg.strides[i] < 1)
      throw ArgumentError("EEG length " + std::to_string(length) + " too short for the projection stack: layer " +
                          std::to_string(i + 1) + " has stride " + std::to_string(cfg.strides[i]) + " on length " +
                          std::to_string(l));
    l = ops::conv_out_len(l, cfg.kernel_size, cfg.strides[i], cfg.padding());
  }
}

void ProjectionParams::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(prefix + "conv" + std::to_string(i) + ".", v);
}

ProjectionParams init_projection(const ProjectionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, {0x70726f6aULL}));
  ProjectionParams p;
  p.config = cfg;
  int in = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.strides.size(); ++i) {
    p.layers.push_back(nn::Conv1d::make(in, cfg.channel_widths[i], cfg.kernel_size, cfg.strides[i], cfg.padding(), rng));
    in = cfg.channel_widths[i];
  }
  return p;
}

Tensor pad_reshape(const Tensor& features, const LatentShape& target) {
  return ops::pad_reshape(features, target.as_shape());
}

Tensor project(const Tensor& eeg, const ProjectionParams& params) {
  const auto& cfg = params.config;
  if (eeg.ndim() != 2 || eeg.dim(0) != cfg.in_channels)
    throw ArgumentError("projection expects [" + std::to_string(cfg.in_channels) + " x L] EEG, got " +
                        shape_str(eeg.shape()));
  check_length(cfg, eeg.dim(1));
  Tensor h = eeg;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = params.layers[i](h);
    if (i + 1 < params.layers.size()) h = ops::silu(h);
  }
  return pad_reshape(h, cfg.target);
}

SubjectLayer SubjectLayer::make(const std::vector<int>& subjects, int channels) {
  if (channels < 1) throw ConfigError("subject layer needs a positive channel count");
  SubjectLayer s;
  s.channels = channels;
  for (int id : subjects) {
    if (id < 0) throw ConfigError("subject ids must be non-negative");
    std::vector<double> eye(static_cast<std::size_t>(channels) * channels, 0.0);
    for (int i = 0; i < channels; ++i) eye[static_cast<std::size_t>(i) * channels + i] = 1.0;
    s.matrices[id] = Tensor::param({channels, channels}, std::move(eye));
  }
  return s;
}

Tensor SubjectLayer::mix(const Tensor& eeg, int subject) const {
  auto it = matrices.find(subject);
  if (it == matrices.end()) throw ArgumentError("subject " + std::to_string(subject) + " is not in the subject layer");
  if (eeg.ndim() != 2 || eeg.dim(0) != channels)
    throw ArgumentError("subject layer expects " + std::to_string(channels) + " channels, got " + shape_str(eeg.shape()));
  return ops::matmul(it->second, eeg);
}

void SubjectLayer::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  for (auto& [id, m] : matrices) v(prefix + "subject" + std::to_string(id), m);
}

}  // namespace e2i::projection
