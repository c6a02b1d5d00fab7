#include "diffusion/backbone.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "core/adam.hpp"
#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/log.hpp"

namespace e2i::diffusion {

using nlohmann::json;

std::string to_string(BackboneKind k) { return k == BackboneKind::Toy ? "toy" : "pretrained_ldm"; }

BackboneKind parse_backbone_kind(const std::string& s) {
  if (s == "toy") return BackboneKind::Toy;
  if (s == "pretrained_ldm") return BackboneKind::PretrainedLdm;
  throw ArgumentError("unknown backbone kind '" + s + "' (expected toy or pretrained_ldm)");
}

std::string make_caption_text(const std::string& class_name) { return "Image of " + class_name; }

std::string Backbone::fingerprint() const {
  auto& self = const_cast<Backbone&>(*this);
  auto params = nn::collect(self.encoder, "enc.");
  auto dec = nn::collect(self.decoder, "dec.");
  params.insert(params.end(), dec.begin(), dec.end());
  std::string extra = "latent" + shape_str(latent().as_shape()) + ";ctx" + std::to_string(unet_config().context_dim);
  for (const auto& s : block_shapes(unet_config())) extra += ";block" + shape_str(s);
  return params_fingerprint(params, extra);
}

Tensor Backbone::predict(const Tensor& z_t, const Tensor& context, int t) const {
  schedule.check_t(t);
  return decoder(encoder(z_t, context, t), context);
}

void Backbone::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  vae.visit(prefix + "vae.", v);
  text.visit(prefix + "text.", v);
  encoder.visit(prefix + "unet.enc.", v);
  decoder.visit(prefix + "unet.dec.", v);
}

void Backbone::set_frozen(bool on) {
  frozen = on;
  nn::set_trainable(*this, !on);
}

Backbone make_toy_backbone(const std::vector<std::string>& class_names, int image_size, std::uint64_t seed,
                           const UNetConfig& unet) {
  if (class_names.empty()) throw ConfigError("backbone needs at least one class name");
  Backbone bb;
  bb.kind = BackboneKind::Toy;
  bb.class_names = class_names;
  bb.vae = ToyVae::make(image_size, seed);
  UNetConfig cfg = unet;
  cfg.latent = bb.vae.latent;
  bb.text = TextEmbedder::make(class_names, cfg.context_dim, seed);
  Rng rng(derive_seed(seed, {0x756e6574ULL}));
  bb.encoder = UNetEncoder::make(cfg, rng);
  bb.decoder = UNetDecoder::make(cfg, rng);
  bb.set_frozen(true);
  return bb;
}

double backbone_loss(const Backbone& bb, const std::vector<LabeledImage>& images, int draws, std::uint64_t seed) {
  if (images.empty()) throw ArgumentError("no images for the backbone loss");
  NoGradGuard ng;
  Rng rng(seed);
  double total = 0;
  for (int i = 0; i < draws; ++i) {
    const auto& li = images[static_cast<std::size_t>(i) % images.size()];
    Tensor z0 = bb.vae.encode(li.image);
    const int t = rng.uniform_int(1, bb.schedule.steps());
    Tensor eps = Tensor::from(z0.shape(), rng.normals(z0.numel()));
    Tensor ctx = bb.text.embed(make_caption_text(bb.class_names.at(li.label)));
    total += ops::mse(bb.predict(bb.schedule.add_noise(z0, t, eps), ctx, t), eps).item();
  }
  return total / draws;
}

void train_toy_backbone(Backbone& bb, const std::vector<LabeledImage>& images, const BackboneTrainOptions& opt) {
  if (images.empty()) throw ArgumentError("backbone training needs images");
  for (const auto& li : images)
    if (li.label < 0 || li.label >= static_cast<int>(bb.class_names.size()))
      throw ArgumentError("image label " + std::to_string(li.label) + " outside the backbone's class table");

  // Distinct stimuli only; the corpus repeats each image per trial.
  std::vector<LabeledImage> unique;
  for (const auto& li : images) {
    bool seen = false;
    for (const auto& u : unique) seen = seen || (u.label == li.label && u.image == li.image);
    if (!seen) unique.push_back(li);
  }
  std::vector<data::Image> raw;
  for (const auto& u : unique) raw.push_back(u.image);
  const double rec = train_vae(bb.vae, raw, opt.vae);
  log::info("toy VAE trained: reconstruction MAE " + std::to_string(rec) + ", latent scale " +
            std::to_string(bb.vae.scale_factor));

  struct Item {
    ToyVae::Moments m;
    int label;
  };
  std::vector<Item> items;
  {
    NoGradGuard ng;
    for (const auto& u : unique) items.push_back({bb.vae.encode_moments(data::image_to_tensor(u.image)), u.label});
  }

  nn::set_trainable(bb.text, true);
  nn::set_trainable(bb.encoder, true);
  nn::set_trainable(bb.decoder, true);
  nn::NamedParams params = nn::collect(bb.text, "text.");
  for (auto& p : nn::collect(bb.encoder, "enc.")) params.push_back(p);
  for (auto& p : nn::collect(bb.decoder, "dec.")) params.push_back(p);
  Adam adam(params, {opt.learning_rate});
  const int batch = std::max(1, opt.batch_size);
  for (int step = 0; step < opt.unet_steps; ++step) {
    Rng rng(derive_seed(opt.seed, {0x626269ULL, static_cast<std::uint64_t>(step)}));
    double total = 0;
    for (int b = 0; b < batch; ++b) {
      const auto& it = items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(items.size()) - 1))];
      std::vector<double> z(it.m.mean.values());
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = (z[i] + std::exp(0.5 * it.m.logvar.at(i)) * rng.normal()) * bb.vae.scale_factor;
      Tensor z0 = Tensor::from(bb.latent().as_shape(), std::move(z));
      const int t = rng.uniform_int(1, bb.schedule.steps());
      Tensor eps = Tensor::from(z0.shape(), rng.normals(z0.numel()));
      const bool uncond = rng.bernoulli(opt.uncond_prob);
      Tensor ctx = bb.text.embed(uncond ? "" : make_caption_text(bb.class_names[it.label]));
      Tensor loss = ops::mse(bb.predict(bb.schedule.add_noise(z0, t, eps), ctx, t), eps);
      total += loss.item();
      backward(loss, 1.0 / batch);
    }
    if (!std::isfinite(total)) throw NumericError("backbone training diverged at step " + std::to_string(step));
    adam.step();
    if (step % 200 == 0) log::debug("backbone step " + std::to_string(step) + " loss " + std::to_string(total / batch));
  }
  bb.set_frozen(true);
}

void save_backbone(const Backbone& bb, const std::string& path) {
  Checkpoint ck;
  ck.kind = "e2i.backbone";
  const auto& c = bb.unet_config();
  ck.meta = {{"backbone_kind", to_string(bb.kind)},
             {"class_names", bb.class_names},
             {"vocab", bb.text.vocab},
             {"text_dim", bb.text.dim},
             {"max_tokens", bb.text.max_tokens},
             {"image_size", bb.vae.image_size},
             {"vae_scale_factor", bb.vae.scale_factor},
             {"latent", {c.latent.channels, c.latent.height, c.latent.width}},
             {"base_width", c.base_width},
             {"time_dim", c.time_dim},
             {"context_dim", c.context_dim},
             {"groups", c.groups},
             {"schedule", {{"steps", bb.schedule.steps()}, {"beta_start", bb.schedule.beta_start()}, {"beta_end", bb.schedule.beta_end()}}},
             {"fingerprint", bb.fingerprint()}};
  ck.put_params(nn::collect(const_cast<Backbone&>(bb)));
  save_checkpoint(ck, path);
}

Backbone load_backbone(BackboneKind kind, const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path))
    throw LoadError(to_string(kind) + " backbone weights not found: " + (path.empty() ? "<empty path>" : path));
  Checkpoint ck = load_checkpoint(path, "e2i.backbone");
  const auto& m = ck.meta;
  try {
    if (m.at("backbone_kind").get<std::string>() != to_string(kind))
      throw LoadError("backbone file " + path + " holds a '" + m.at("backbone_kind").get<std::string>() +
                      "' model, requested '" + to_string(kind) + "'");
    UNetConfig cfg;
    auto lat = m.at("latent").get<std::vector<int>>();
    cfg.base_width = m.at("base_width");
    cfg.time_dim = m.at("time_dim");
    cfg.context_dim = m.at("context_dim");
    cfg.groups = m.at("groups");
    Backbone bb = make_toy_backbone(m.at("class_names").get<std::vector<std::string>>(), m.at("image_size"), 0, cfg);
    bb.kind = kind;
    if (bb.latent().as_shape() != Shape(lat.begin(), lat.end()))
      throw LoadError("backbone latent shape in " + path + " does not match its image size");
    bb.text.vocab = m.at("vocab").get<std::vector<std::string>>();
    bb.text.dim = m.at("text_dim");
    bb.text.max_tokens = m.at("max_tokens");
    bb.text.token_table = Tensor::zeros({static_cast<int>(bb.text.vocab.size()), bb.text.dim});
    bb.text.pos_table = Tensor::zeros({bb.text.max_tokens, bb.text.dim});
    bb.vae.scale_factor = m.at("vae_scale_factor");
    const auto& s = m.at("schedule");
    bb.schedule = NoiseSchedule(s.at("steps"), s.at("beta_start"), s.at("beta_end"));
    auto params = nn::collect(bb);
    ck.load_params(params);
    bb.set_frozen(true);
    if (bb.fingerprint() != m.at("fingerprint").get<std::string>())
      throw LoadError("backbone fingerprint mismatch in " + path);
    return bb;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed backbone metadata in " + path + ": " + e.what());
  }
}

}  // namespace e2i::diffusion
