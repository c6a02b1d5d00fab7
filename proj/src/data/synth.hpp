#pragma once

#include <cstdint>

#include "data/manifest.hpp"

namespace e2i::data {

struct SynthOptions {
  int num_classes = 4;
  int channels = 8;
  int length = 128;
  int samples_per_class = 16;
  int image_size = 64;
  std::uint64_t seed = 7;
  int num_subjects = 2;
  double sample_rate_hz = 128.0;
  // Additive white-noise std relative to unit-amplitude class oscillations.
  double noise_std = 0.8;
  // Per class, this fraction of samples (rounded up) goes to "test".
  double test_fraction = 0.25;
  // Stimulus images per class. Above 1, trial i of a class shows variant
  // i % variants_per_class and its EEG carries a variant oscillation.
  int variants_per_class = 1;
};

// The stimulus image of a class: a colored glyph on a dark background. With
// several variants the glyph is drawn smaller at a variant-specific spot.
Image class_glyph(int class_label, int num_classes, int image_size, int variant = 0, int variants = 1);

// Desk-scale corpus. EEG trials are class-dependent phase-locked sinusoids
// plus noise, standardized per recording; each class has one stimulus
// image per variant. Deterministic in the options.
Dataset synth_dataset(const SynthOptions& opt);

}  // namespace e2i::data
