#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "core/nn.hpp"

namespace e2i::projection {

struct LatentShape {
  int channels = 4;
  int height = 64;
  int width = 64;

  std::size_t numel() const { return static_cast<std::size_t>(channels) * height * width; }
  Shape as_shape() const { return {channels, height, width}; }
  bool operator==(const LatentShape&) const = default;
};

struct ProjectionConfig {
  int in_channels = 128;
  // Shortest recording the stack must accept.
  int min_length = 32;
  std::vector<int> channel_widths{320, 640, 1280, 2560};
  std::vector<int> strides{5, 2, 2, 2};
  int kernel_size = 3;
  LatentShape target{};

  int padding() const { return kernel_size / 2; }
  // Throws ConfigError on malformed or infeasible settings.
  void validate() const;
  bool operator==(const ProjectionConfig&) const = default;
};

// Temporal lengths through the stack: {L, after layer 1, ..., after layer n}.
std::vector<int> layer_lengths(const ProjectionConfig& cfg, int length);

// Throws ArgumentError when some layer's stride exceeds the length it is
// applied to, i.e. the stack would have no full stride of input left.
void check_length(const ProjectionConfig& cfg, int length);

struct ProjectionParams {
  ProjectionConfig config;
  std::vector<nn::Conv1d> layers;

  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

ProjectionParams init_projection(const ProjectionConfig& cfg, std::uint64_t seed);

// Row-major flatten, zero-pad or truncate to target.numel(), reshape.
Tensor pad_reshape(const Tensor& features, const LatentShape& target);

// Conv1d stack over time with SiLU between layers, then pad_reshape.
// eeg is [C x L], standardized.
Tensor project(const Tensor& eeg, const ProjectionParams& params);

// Per-subject channel mixing y -> M_s y, with M_s identity at creation.
struct SubjectLayer {
  int channels = 0;
  std::map<int, Tensor> matrices;

  static SubjectLayer make(const std::vector<int>& subjects, int channels);
  bool has(int subject) const { return matrices.count(subject) != 0; }
  // Throws ArgumentError for an unknown subject.
  Tensor mix(const Tensor& eeg, int subject) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

}  // namespace e2i::projection
