#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "data/image.hpp"

namespace e2i::data {

// One multichannel trial, samples stored channel-major [C x L].
struct EEGRecording {
  std::string id;
  int channels = 0;
  int length = 0;
  std::vector<double> samples;
  int subject_id = 0;
  int class_label = 0;
  std::string stimulus_ref;
  double sample_rate_hz = 1.0;

  double at(int c, int t) const { return samples[static_cast<std::size_t>(c) * length + t]; }
  double& at(int c, int t) { return samples[static_cast<std::size_t>(c) * length + t]; }
  // Throws ArgumentError on broken shape, non-finite values, or a label
  // outside [0, num_classes) when num_classes > 0.
  void validate(int num_classes = 0) const;
  Tensor to_tensor() const;
  bool operator==(const EEGRecording&) const = default;
};

struct PairedSample {
  EEGRecording eeg;
  std::string image_path;
  std::shared_ptr<const Image> image;
};

struct Standardized {
  EEGRecording eeg;
  std::vector<int> zero_variance_channels;
};

// Per-recording, per-channel z-scoring with population std. A channel with
// zero variance is only mean-subtracted and reported.
Standardized standardize(const EEGRecording& eeg);

// Sliding windows with stride round(window * (1 - overlap)), at least 1.
// The trailing partial window is dropped.
std::vector<EEGRecording> chunk(const EEGRecording& eeg, int window_length, double overlap_fraction);

}  // namespace e2i::data
