#include "diffusion/vae.hpp"

#include <cmath>

#include "core/adam.hpp"
#include "core/error.hpp"
#include "core/log.hpp"

namespace e2i::diffusion {

ToyVae ToyVae::make(int image_size, std::uint64_t seed) {
  if (image_size < 8 || image_size % 8 != 0) throw ConfigError("toy VAE image size must be a positive multiple of 8");
  Rng rng(derive_seed(seed, {0x766165ULL}));
  ToyVae v;
  v.image_size = image_size;
  v.latent = {4, image_size / 8, image_size / 8};
  v.enc.push_back(nn::Conv2d::make(3, 16, 3, 2, 1, rng));
  v.enc.push_back(nn::Conv2d::make(16, 32, 3, 2, 1, rng));
  v.enc.push_back(nn::Conv2d::make(32, 32, 3, 2, 1, rng));
  v.enc.push_back(nn::Conv2d::make(32, 2 * v.latent.channels, 3, 1, 1, rng));
  v.dec.push_back(nn::Conv2d::make(v.latent.channels, 32, 3, 1, 1, rng));
  v.dec.push_back(nn::Conv2d::make(32, 32, 3, 1, 1, rng));
  v.dec.push_back(nn::Conv2d::make(32, 16, 3, 1, 1, rng));
  v.dec.push_back(nn::Conv2d::make(16, 3, 3, 1, 1, rng));
  return v;
}

ToyVae::Moments ToyVae::encode_moments(const Tensor& image_chw) const {
  Tensor h = ops::add_channel_bias(ops::scale(image_chw, 2.0), Tensor::full({3}, -1.0));
  for (std::size_t i = 0; i + 1 < enc.size(); ++i) h = ops::silu(enc[i](h));
  h = enc.back()(h);
  const int d = latent.channels;
  return {ops::slice0(h, 0, d), ops::slice0(h, d, d)};
}

Tensor ToyVae::decode_raw(const Tensor& z) const {
  Tensor h = ops::silu(dec[0](z));
  for (std::size_t i = 1; i + 1 < dec.size(); ++i) h = ops::silu(dec[i](ops::upsample_nearest(h, 2)));
  return ops::sigmoid(dec.back()(ops::upsample_nearest(h, 2)));
}

void ToyVae::check_image(const data::Image& image) const {
  if (image.channels != 3)
    throw ArgumentError("VAE expects an RGB image, got " + std::to_string(image.channels) + " channel(s)");
  if (image.height != image_size || image.width != image_size)
    throw ArgumentError("VAE expects " + std::to_string(image_size) + "x" + std::to_string(image_size) + " images, got " +
                        std::to_string(image.height) + "x" + std::to_string(image.width));
}

Tensor ToyVae::encode(const data::Image& image, Rng* rng) const {
  check_image(image);
  NoGradGuard ng;
  auto m = encode_moments(data::image_to_tensor(image));
  std::vector<double> z(m.mean.values());
  if (rng) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5 * m.logvar.at(i)) * rng->normal();
  }
  for (auto& v : z) v *= scale_factor;
  return Tensor::from(latent.as_shape(), std::move(z));
}

data::Image ToyVae::decode(const Tensor& scaled_latent) const {
  if (scaled_latent.shape() != latent.as_shape())
    throw ArgumentError("VAE decode expects latent " + shape_str(latent.as_shape()) + ", got " +
                        shape_str(scaled_latent.shape()));
  NoGradGuard ng;
  return data::tensor_to_image(decode_raw(ops::scale(scaled_latent, 1.0 / scale_factor)));
}

void ToyVae::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  for (std::size_t i = 0; i < enc.size(); ++i) enc[i].visit(prefix + "enc" + std::to_string(i) + ".", v);
  for (std::size_t i = 0; i < dec.size(); ++i) dec[i].visit(prefix + "dec" + std::to_string(i) + ".", v);
}

double vae_reconstruction_error(const ToyVae& vae, const std::vector<data::Image>& images) {
  if (images.empty()) throw ArgumentError("no images to reconstruct");
  double err = 0;
  std::size_t n = 0;
  for (const auto& img : images) {
    auto rec = vae.decode(vae.encode(img));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) err += std::abs(rec.pixels[i] - img.pixels[i]);
    n += img.pixels.size();
  }
  return err / static_cast<double>(n);
}

double train_vae(ToyVae& vae, const std::vector<data::Image>& images, const VaeTrainOptions& opt) {
  if (images.empty()) throw ArgumentError("VAE training needs at least one image");
  for (const auto& img : images) vae.check_image(img);
  nn::set_trainable(vae, true);
  Adam adam(nn::collect(vae), {opt.learning_rate});
  std::vector<Tensor> inputs;
  for (const auto& img : images) inputs.push_back(data::image_to_tensor(img));
  const int batch = std::max(1, std::min<int>(opt.batch_size, static_cast<int>(images.size())));
  for (int step = 0; step < opt.steps; ++step) {
    Rng rng(derive_seed(opt.seed, {0x7661ULL, static_cast<std::uint64_t>(step)}));
    double total = 0;
    for (int b = 0; b < batch; ++b) {
      const auto& x = inputs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(inputs.size()) - 1))];
      auto m = vae.encode_moments(x);
      Tensor std_dev = ops::exp(ops::scale(m.logvar, 0.5));
      Tensor z = ops::add(m.mean, ops::mul(std_dev, Tensor::from(m.mean.shape(), rng.normals(m.mean.numel()))));
      Tensor rec = ops::mse(vae.decode_raw(z), x);
      // KL(q || N(0, I)) per latent element.
      Tensor kl = ops::scale(ops::mean(ops::sub(ops::add(ops::mul(m.mean, m.mean), ops::exp(m.logvar)),
                                                ops::add_channel_bias(m.logvar, Tensor::full({m.logvar.dim(0)}, 1.0)))),
                             0.5);
      Tensor loss = ops::add(rec, ops::scale(kl, opt.kl_weight));
      total += loss.item();
      backward(loss, 1.0 / batch);
    }
    if (!std::isfinite(total)) throw NumericError("VAE training diverged at step " + std::to_string(step));
    adam.step();
    if (step % 100 == 0) log::debug("vae step " + std::to_string(step) + " loss " + std::to_string(total / batch));
  }
  nn::set_trainable(vae, false);

  // Scale so the latent means have unit standard deviation.
  double s = 0, s2 = 0;
  std::size_t n = 0;
  {
    NoGradGuard ng;
    for (const auto& x : inputs) {
      for (double v : vae.encode_moments(x).mean.values()) {
        s += v;
        s2 += v * v;
        ++n;
      }
    }
  }
  const double mu = s / n;
  const double sd = std::sqrt(std::max(s2 / n - mu * mu, 1e-12));
  vae.scale_factor = 1.0 / sd;
  return vae_reconstruction_error(vae, images);
}

}  // namespace e2i::diffusion
