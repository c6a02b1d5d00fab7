#include "core/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace e2i {

Adam::Adam(nn::NamedParams params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto& [name, t] : params_) {
    if (state_.count(name)) throw InternalError("duplicate parameter name " + name);
    state_[name] = {std::vector<double>(t.numel(), 0.0), std::vector<double>(t.numel(), 0.0)};
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, t] : params_) {
    auto g = t.grad();
    if (g.empty()) continue;
    auto& st = state_[name];
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i];
      st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + cfg_.eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void Adam::restore(long steps, std::map<std::string, Moments> state) {
  for (const auto& [name, t] : params_) {
    auto it = state.find(name);
    if (it == state.end() || it->second.m.size() != t.numel() || it->second.v.size() != t.numel())
      throw LoadError("optimizer state missing or mis-sized for " + name);
  }
  state_ = std::move(state);
  t_ = steps;
}

}  // namespace e2i
