#include "diffusion/engine.hpp"

#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace e2i::diffusion {

void ControlState::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  adapter.visit(prefix + "adapter.", v);
  projection.visit(prefix + "projection.", v);
  subjects.visit(prefix + "subject_layer.", v);
}

Tensor ControlState::eeg_latent(const Tensor& eeg, int subject) const {
  return projection::project(subjects.mix(eeg, subject), projection);
}

ControlState make_control_state(const Backbone& bb, projection::ProjectionConfig proj, const std::vector<int>& subjects,
                                std::uint64_t seed) {
  proj.target = bb.latent();
  ControlState s;
  s.adapter = adapter::clone_encoder(bb);
  s.projection = projection::init_projection(proj, seed);
  s.subjects = projection::SubjectLayer::make(subjects, proj.in_channels);
  return s;
}

Tensor controlled_predict(const Backbone& bb, const adapter::AdapterState& ad, const Tensor& z_t, const Tensor& z_eeg,
                          const Tensor& backbone_context, const Tensor& adapter_context, int t,
                          const std::vector<double>& scales) {
  auto res = adapter::adapter_forward(ad, adapter::build_control(z_t, z_eeg, ad.input_zero_conv), adapter_context, t,
                                      bb.schedule);
  if (!scales.empty()) {
    if (scales.size() != res.maps.size())
      throw ArgumentError("expected " + std::to_string(res.maps.size()) + " control scales, got " +
                          std::to_string(scales.size()));
    res.scales = scales;
  }
  auto acts = bb.encoder(z_t, backbone_context, t);
  adapter::inject_residuals(acts, res);
  return bb.decoder(acts, backbone_context);
}

TrainExample make_train_example(const Backbone& bb, const data::PairedSample& ps, const std::string& caption) {
  if (!ps.image) throw ArgumentError("sample " + ps.eeg.id + " has no loaded image");
  bb.vae.check_image(*ps.image);
  TrainExample ex;
  ex.id = ps.eeg.id;
  ex.eeg = ps.eeg.to_tensor();
  ex.subject = ps.eeg.subject_id;
  ex.caption = caption;
  NoGradGuard ng;
  ex.image_moments = bb.vae.encode_moments(data::image_to_tensor(*ps.image));
  return ex;
}

bool draw_caption_drop(Rng& rng) { return rng.bernoulli(kCaptionDropProbability); }

Trainer::Trainer(const Backbone& bb, ControlState& state, AdamConfig adam, bool drop_enabled, std::uint64_t seed,
                 bool sample_latents)
    : bb_(bb),
      state_(state),
      adam_(nn::collect(state), adam),
      drop_(drop_enabled),
      seed_(seed),
      sample_latents_(sample_latents) {
  nn::set_trainable(state_, true);
}

Tensor Trainer::example_loss(const TrainExample& ex, Rng& rng, bool* dropped) const {
  // Draw order is fixed: drop, t, eps, latent noise.
  const bool drop = drop_ && draw_caption_drop(rng);
  if (dropped) *dropped = drop;
  const int t = rng.uniform_int(1, bb_.schedule.steps());
  const auto& m = ex.image_moments;
  Tensor eps = Tensor::from(m.mean.shape(), rng.normals(m.mean.numel()));
  std::vector<double> z(m.mean.values());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (sample_latents_) z[i] += std::exp(0.5 * m.logvar.at(i)) * rng.normal();
    z[i] *= bb_.vae.scale_factor;
  }
  Tensor z_t = bb_.schedule.add_noise(Tensor::from(m.mean.shape(), std::move(z)), t, eps);
  Tensor ctx = bb_.text.embed(drop ? "" : ex.caption);
  Tensor z_eeg = state_.eeg_latent(ex.eeg, ex.subject);
  return ops::mse(controlled_predict(bb_, state_.adapter, z_t, z_eeg, ctx, ctx, t), eps);
}

StepStats Trainer::step(const std::vector<const TrainExample*>& batch) {
  if (batch.empty()) throw ArgumentError("training step needs a non-empty batch");
  StepStats st;
  Rng rng(derive_seed(seed_, {0x747261696eULL, static_cast<std::uint64_t>(step_)}));
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto* ex : batch) {
    bool dropped = false;
    Tensor loss = example_loss(*ex, rng, &dropped);
    const double v = loss.item();
    if (!std::isfinite(v)) {
      adam_.zero_grad();
      std::ostringstream msg;
      msg << "non-finite loss at step " << step_ << " on sample " << ex->id << " (caption '" << ex->caption
          << "', dropped " << dropped << ")";
      throw NumericError(msg.str());
    }
    backward(loss, w);
    st.loss += v * w;
    st.captions_dropped += dropped ? 1 : 0;
    ++st.samples;
  }
  adam_.step();
  ++step_;
  return st;
}

double evaluation_loss(const Backbone& bb, const ControlState& state, const std::vector<TrainExample>& examples,
                       int draws_per_example, std::uint64_t seed) {
  if (examples.empty()) throw ArgumentError("evaluation loss needs examples");
  NoGradGuard ng;
  double total = 0;
  int n = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    Rng rng(derive_seed(seed, {0x6576616cULL, i}));
    Tensor ctx = bb.text.embed(ex.caption);
    Tensor z_eeg = state.eeg_latent(ex.eeg, ex.subject);
    Tensor z0 = ops::scale(ex.image_moments.mean, bb.vae.scale_factor);
    for (int d = 0; d < draws_per_example; ++d) {
      const int t = rng.uniform_int(1, bb.schedule.steps());
      Tensor eps = Tensor::from(z0.shape(), rng.normals(z0.numel()));
      Tensor z_t = bb.schedule.add_noise(z0, t, eps);
      total += ops::mse(controlled_predict(bb, state.adapter, z_t, z_eeg, ctx, ctx, t), eps).item();
      ++n;
    }
  }
  return total / n;
}

std::vector<double> resolve_scales(const GenerationRequest& req, std::size_t blocks) {
  if (!req.control_scales.empty()) {
    if (req.control_scales.size() != blocks)
      throw ArgumentError("expected " + std::to_string(blocks) + " control scales, got " +
                          std::to_string(req.control_scales.size()));
    return req.control_scales;
  }
  return req.guess_mode ? adapter::guess_mode_scales(blocks) : std::vector<double>(blocks, 1.0);
}

GenerationResult sample(const Backbone& bb, const ControlState* state, const GenerationRequest& req) {
  if (req.steps < 1) throw ArgumentError("generation needs at least one step");
  if (!(req.guidance_scale >= 0)) throw ArgumentError("guidance scale must be non-negative");
  NoGradGuard ng;
  const Shape shape = bb.latent().as_shape();
  const std::size_t blocks = block_shapes(bb.unet_config()).size();
  GenerationResult out;
  out.scales = resolve_scales(req, blocks);

  Tensor z_eeg;
  if (state) {
    z_eeg = state->eeg_latent(req.eeg, req.subject);
    if (req.zero_eeg) z_eeg = Tensor::zeros(shape);
  }
  const Tensor caption_ctx = bb.text.embed(req.caption);
  const Tensor empty_ctx = bb.text.embed("");
  const Tensor& backbone_ctx = req.guess_mode ? empty_ctx : caption_ctx;
  const bool cfg = req.guidance_scale != 1.0;

  auto predict = [&](const Tensor& z, int t, const Tensor& bctx, const Tensor& actx) {
    if (!state) return bb.predict(z, bctx, t);
    return controlled_predict(bb, state->adapter, z, z_eeg, bctx, actx, t, out.scales);
  };

  Rng init(derive_seed(req.seed, {0x696e6974ULL}));
  Tensor z = Tensor::from(shape, init.normals(shape_numel(shape)));
  const auto ts = sampling_timesteps(bb.schedule.steps(), req.steps);
  const double eta = req.stochastic ? 1.0 : 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    Tensor eps = predict(z, t, backbone_ctx, caption_ctx);
    if (cfg) {
      Tensor eps_u = predict(z, t, empty_ctx, empty_ctx);
      eps = ops::add(eps_u, ops::scale(ops::sub(eps, eps_u), req.guidance_scale));
    }
    const double a = bb.schedule.alpha_bar(t), ap = bb.schedule.alpha_bar(t_prev);
    const double sigma = eta * std::sqrt((1 - ap) / (1 - a) * (1 - a / ap));
    const double dir = std::sqrt(std::max(0.0, 1 - ap - sigma * sigma));
    std::vector<double> next(z.numel());
    Rng step_rng(derive_seed(req.seed, {0x73746570ULL, static_cast<std::uint64_t>(i)}));
    for (std::size_t k = 0; k < next.size(); ++k) {
      const double x0 = (z.at(k) - std::sqrt(1 - a) * eps.at(k)) / std::sqrt(a);
      next[k] = std::sqrt(ap) * x0 + dir * eps.at(k);
      if (sigma > 0) next[k] += sigma * step_rng.normal();
    }
    z = Tensor::from(shape, std::move(next));
  }
  out.latent = z;
  out.image = bb.vae.decode(z);
  return out;
}

}  // namespace e2i::diffusion
