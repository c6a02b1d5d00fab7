#include "diffusion/schedule.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/ops.hpp"

namespace e2i::diffusion {

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end)
    : steps_(steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 1) throw ConfigError("noise schedule needs at least one step");
  if (!(beta_start > 0) || !(beta_end >= beta_start) || !(beta_end < 1))
    throw ConfigError("noise schedule betas must satisfy 0 < start <= end < 1");
  alpha_bar_.assign(static_cast<std::size_t>(steps) + 1, 1.0);
  for (int t = 1; t <= steps; ++t) alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta(t));
}

double NoiseSchedule::beta(int t) const {
  check_t(t);
  if (t == 0) return 0.0;
  if (steps_ == 1) return beta_start_;
  return beta_start_ + (beta_end_ - beta_start_) * (t - 1) / (steps_ - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
  check_t(t);
  return alpha_bar_[t];
}

double NoiseSchedule::snr(int t) const {
  const double a = alpha_bar(t);
  return a / (1.0 - a);
}

void NoiseSchedule::check_t(int t) const {
  if (t < 0 || t > steps_)
    throw ArgumentError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps_) + "]");
}

Tensor NoiseSchedule::add_noise(const Tensor& z, int t, const Tensor& eps) const {
  check_t(t);
  if (z.shape() != eps.shape())
    throw ArgumentError("add_noise shape mismatch: " + shape_str(z.shape()) + " vs " + shape_str(eps.shape()));
  if (t == 0) return z;
  const double a = alpha_bar_[t];
  return ops::add(ops::scale(z, std::sqrt(a)), ops::scale(eps, std::sqrt(1.0 - a)));
}

std::vector<int> sampling_timesteps(int total_steps, int sampler_steps) {
  if (sampler_steps < 1) throw ArgumentError("sampler needs at least one step");
  if (sampler_steps > total_steps) throw ArgumentError("sampler steps exceed the schedule length");
  std::vector<int> ts;
  for (int k = sampler_steps - 1; k >= 0; --k)
    ts.push_back(1 + static_cast<int>(static_cast<long long>(k) * total_steps / sampler_steps));
  // Start from the noisiest step.
  ts.front() = total_steps;
  return ts;
}

}  // namespace e2i::diffusion
