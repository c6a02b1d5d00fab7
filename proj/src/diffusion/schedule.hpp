#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace e2i::diffusion {

// Linear-variance forward process over t = 1..T; t = 0 is the clean latent.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  int steps() const { return steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  double beta(int t) const;
  // Cumulative product of (1 - beta_s) for s <= t; 1 at t = 0.
  double alpha_bar(int t) const;
  double snr(int t) const;

  // sqrt(alpha_bar) z + sqrt(1 - alpha_bar) eps. ArgumentError outside [0, T].
  Tensor add_noise(const Tensor& z, int t, const Tensor& eps) const;

  void check_t(int t) const;

 private:
  int steps_;
  double beta_start_, beta_end_;
  std::vector<double> alpha_bar_;  // index t
};

// Descending timesteps used by a sampler with the given step count; the last
// entry is the final denoising step (t >= 1).
std::vector<int> sampling_timesteps(int total_steps, int sampler_steps);

}  // namespace e2i::diffusion
