#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adapter/adapter.hpp"
#include "core/adam.hpp"
#include "data/eeg.hpp"
#include "diffusion/backbone.hpp"
#include "projection/projection.hpp"

namespace e2i::diffusion {

inline constexpr double kCaptionDropProbability = 0.5;

// Everything that trains: adapter, EEG projection and subject layer.
struct ControlState {
  adapter::AdapterState adapter;
  projection::ProjectionParams projection;
  projection::SubjectLayer subjects;

  void visit(const std::string& prefix, const nn::ParamVisitor& v);
  // z_eeg = f_proj(S(y, s)).
  Tensor eeg_latent(const Tensor& eeg, int subject) const;
};

// Builds a fresh control state against a backbone. The projection target
// is the backbone latent shape.
ControlState make_control_state(const Backbone& bb, projection::ProjectionConfig proj, const std::vector<int>& subjects,
                                std::uint64_t seed);

// Backbone prediction with adapter residuals injected. backbone_context and
// adapter_context differ in guess mode.
Tensor controlled_predict(const Backbone& bb, const adapter::AdapterState& ad, const Tensor& z_t, const Tensor& z_eeg,
                          const Tensor& backbone_context, const Tensor& adapter_context, int t,
                          const std::vector<double>& scales = {});

// One training example with everything the step needs precomputed.
struct TrainExample {
  std::string id;
  Tensor eeg;  // standardized [C, L]
  int subject = 0;
  std::string caption;  // from the frozen semantic decoder
  ToyVae::Moments image_moments;  // unscaled VAE moments of the stimulus
};

TrainExample make_train_example(const Backbone& bb, const data::PairedSample& ps, const std::string& caption);

struct StepStats {
  double loss = 0;  // mean over the batch
  int samples = 0;
  int captions_dropped = 0;
};

// Per-sample caption drop decision, Bernoulli(kCaptionDropProbability).
bool draw_caption_drop(Rng& rng);

class Trainer {
 public:
  Trainer(const Backbone& bb, ControlState& state, AdamConfig adam, bool drop_enabled, std::uint64_t seed,
          bool sample_latents = true);

  // Forward, backward and one Adam update. Randomness comes from (seed,
  // step index) so a resumed run repeats the uninterrupted one. Throws
  // NumericError on a non-finite loss without applying the update.
  StepStats step(const std::vector<const TrainExample*>& batch);

  // Loss of one example under fixed draws, recording gradients when
  // grad mode is on. Exposed for gradient checks.
  Tensor example_loss(const TrainExample& ex, Rng& rng, bool* dropped = nullptr) const;

  long steps_taken() const { return step_; }
  void set_step(long s) { step_ = s; }
  Adam& optimizer() { return adam_; }
  bool drop_enabled() const { return drop_; }

 private:
  const Backbone& bb_;
  ControlState& state_;
  Adam adam_;
  bool drop_;
  std::uint64_t seed_;
  bool sample_latents_;
  long step_ = 0;
};

// Mean loss over fixed (t, eps) draws, no gradient; used to compare a
// state before and after training on the same evaluation set.
double evaluation_loss(const Backbone& bb, const ControlState& state, const std::vector<TrainExample>& examples,
                       int draws_per_example, std::uint64_t seed);

struct GenerationRequest {
  Tensor eeg;
  int subject = 0;
  std::string caption;
  int steps = 50;
  bool guess_mode = false;
  std::vector<double> control_scales;  // empty: 1 per block, or the guess ramp
  double guidance_scale = 1.0;
  bool stochastic = false;
  bool zero_eeg = false;  // coarse-only ablation
  std::uint64_t seed = 0;
};

struct GenerationResult {
  data::Image image;
  Tensor latent;
  std::vector<double> scales;
};

// Denoises from N(0, I) with DDIM (eta 0, or eta 1 when stochastic) and
// decodes with the VAE. state == nullptr samples the backbone alone.
GenerationResult sample(const Backbone& bb, const ControlState* state, const GenerationRequest& req);

std::vector<double> resolve_scales(const GenerationRequest& req, std::size_t blocks);

}  // namespace e2i::diffusion
