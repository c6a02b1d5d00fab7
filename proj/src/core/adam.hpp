#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace e2i {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed, named parameter list. Moments are keyed by name so
// they can be checkpointed and restored.
class Adam {
 public:
  Adam(nn::NamedParams params, AdamConfig cfg);

  // Applies one update from the accumulated grads, then clears them.
  void step();
  void zero_grad();

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const nn::NamedParams& params() const { return params_; }

  struct Moments {
    std::vector<double> m, v;
  };
  const std::map<std::string, Moments>& moments() const { return state_; }
  void restore(long steps, std::map<std::string, Moments> state);

 private:
  nn::NamedParams params_;
  AdamConfig cfg_;
  std::map<std::string, Moments> state_;
  long t_ = 0;
};

}  // namespace e2i
