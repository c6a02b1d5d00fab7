#pragma once

#include <string>
#include <vector>

#include "diffusion/backbone.hpp"

namespace e2i::adapter {

// Trainable encoder copy joined to the backbone by zero convolutions.
struct AdapterState {
  diffusion::UNetEncoder encoder_copy;
  nn::Conv2d input_zero_conv;
  std::vector<nn::Conv2d> output_zero_convs;  // one per injection point
  std::string backbone_fingerprint;

  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

struct ControlResiduals {
  std::vector<Tensor> maps;    // skips in order, bottleneck last
  std::vector<double> scales;  // same length as maps
};

// Copies the backbone encoder weight for weight and builds zero
// convolutions. ConfigError when declared_shapes is non-empty and differs
// from the backbone's block shapes.
AdapterState clone_encoder(const diffusion::Backbone& backbone, const std::vector<Shape>& declared_shapes = {});

// z_t + Z(z_eeg).
Tensor build_control(const Tensor& z_t, const Tensor& z_eeg, const nn::Conv2d& input_zero_conv);

// Runs the encoder copy on c_eeg and maps each block output through its
// zero convolution. Scales default to 1.
ControlResiduals adapter_forward(const AdapterState& a, const Tensor& c_eeg, const Tensor& caption_embedding, int t,
                                 const diffusion::NoiseSchedule& schedule);

// activation_i + scale_i * residual_i on every skip and the bottleneck.
void inject_residuals(diffusion::EncoderOutput& acts, const ControlResiduals& residuals);

// Geometric ramp over K blocks: deepest 1.0, shallowest 0.1.
std::vector<double> guess_mode_scales(std::size_t blocks);

}  // namespace e2i::adapter
