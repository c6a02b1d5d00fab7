#pragma once

#include <string>
#include <vector>

#include "diffusion/schedule.hpp"
#include "diffusion/text.hpp"
#include "diffusion/unet.hpp"
#include "diffusion/vae.hpp"

namespace e2i::diffusion {

enum class BackboneKind { Toy, PretrainedLdm };

std::string to_string(BackboneKind k);
BackboneKind parse_backbone_kind(const std::string& s);

// Frozen latent diffusion model: VAE, caption embedder, UNet split into an
// encoder and a decoder, and the noise schedule it was trained with.
struct Backbone {
  BackboneKind kind = BackboneKind::Toy;
  std::vector<std::string> class_names;
  ToyVae vae;
  TextEmbedder text;
  UNetEncoder encoder;
  UNetDecoder decoder;
  NoiseSchedule schedule;
  bool frozen = true;

  const UNetConfig& unet_config() const { return encoder.config; }
  const projection::LatentShape& latent() const { return encoder.config.latent; }
  // Hash of the UNet parameter layout, block shapes and latent geometry.
  std::string fingerprint() const;

  // Noise prediction without any control.
  Tensor predict(const Tensor& z_t, const Tensor& context, int t) const;

  void visit(const std::string& prefix, const nn::ParamVisitor& v);
  void set_frozen(bool on);
};

Backbone make_toy_backbone(const std::vector<std::string>& class_names, int image_size, std::uint64_t seed,
                           const UNetConfig& unet = {});

struct BackboneTrainOptions {
  VaeTrainOptions vae;
  int unet_steps = 2000;
  int batch_size = 8;
  double learning_rate = 1e-3;
  // Fraction of captions replaced by the empty caption so the model also
  // learns the unconditional prediction.
  double uncond_prob = 0.2;
  std::uint64_t seed = 1;
};

struct LabeledImage {
  data::Image image;
  int label = 0;
};

// Trains the VAE, then the UNet on VAE latents with "Image of <class>"
// captions. The result is frozen.
void train_toy_backbone(Backbone& bb, const std::vector<LabeledImage>& images, const BackboneTrainOptions& opt);

// Mean noise-prediction loss of the UNet alone over a fixed draw.
double backbone_loss(const Backbone& bb, const std::vector<LabeledImage>& images, int draws, std::uint64_t seed);

void save_backbone(const Backbone& bb, const std::string& path);
// LoadError when the file is missing, malformed or of another kind.
Backbone load_backbone(BackboneKind kind, const std::string& path);

std::string make_caption_text(const std::string& class_name);

}  // namespace e2i::diffusion
