#pragma once

#include <optional>

#include "core/nn.hpp"
#include "data/image.hpp"
#include "projection/projection.hpp"

namespace e2i::diffusion {

struct VaeTrainOptions {
  int steps = 600;
  int batch_size = 4;
  double learning_rate = 2e-3;
  double kl_weight = 1e-4;
  std::uint64_t seed = 1;
};

// Small convolutional VAE: 64x64x3 images <-> 4x8x8 latents (three stride-2
// stages). Latents handed to the diffusion model are multiplied by
// scale_factor so they have roughly unit variance.
struct ToyVae {
  int image_size = 64;
  projection::LatentShape latent{4, 8, 8};
  double scale_factor = 1.0;

  std::vector<nn::Conv2d> enc;  // last layer emits mean and log-variance
  std::vector<nn::Conv2d> dec;

  static ToyVae make(int image_size, std::uint64_t seed);

  struct Moments {
    Tensor mean, logvar;  // unscaled, [D, H, W]
  };
  Moments encode_moments(const Tensor& image_chw) const;
  // Decodes an unscaled latent into a [3, H, W] image in (0, 1).
  Tensor decode_raw(const Tensor& z) const;

  // Scaled latent of an image. rng == nullptr gives the mean.
  Tensor encode(const data::Image& image, Rng* rng = nullptr) const;
  data::Image decode(const Tensor& scaled_latent) const;

  void check_image(const data::Image& image) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

// Trains reconstruction with a small KL term, then sets scale_factor from
// the spread of the training latents. Returns the final mean abs error.
double train_vae(ToyVae& vae, const std::vector<data::Image>& images, const VaeTrainOptions& opt);

// Mean absolute pixel error of deterministic encode/decode.
double vae_reconstruction_error(const ToyVae& vae, const std::vector<data::Image>& images);

}  // namespace e2i::diffusion
