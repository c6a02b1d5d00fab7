#include "metrics/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "core/adam.hpp"
#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/log.hpp"

namespace e2i::metrics {

Evaluator Evaluator::make(int image_size, int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("evaluator needs at least two classes");
  if (image_size < 8) throw ConfigError("evaluator image size too small");
  Rng rng(derive_seed(seed, {0x6576616cULL}));
  Evaluator e;
  e.image_size = image_size;
  e.num_classes = num_classes;
  e.convs.push_back(nn::Conv2d::make(3, 16, 3, 2, 1, rng));
  e.convs.push_back(nn::Conv2d::make(16, 32, 3, 2, 1, rng));
  e.convs.push_back(nn::Conv2d::make(32, 64, 3, 2, 1, rng));
  e.head = nn::Linear::make(64, num_classes, rng);
  return e;
}

void Evaluator::check_image(const data::Image& image) const {
  if (image.channels != 3 || image.height != image_size || image.width != image_size)
    throw ArgumentError("evaluator expects " + std::to_string(image_size) + "x" + std::to_string(image_size) +
                        " RGB images");
}

Evaluator::Forward Evaluator::forward(const data::Image& image) const {
  check_image(image);
  Forward f;
  Tensor h = ops::add_channel_bias(ops::scale(data::image_to_tensor(image), 2.0), Tensor::full({3}, -1.0));
  for (const auto& c : convs) {
    h = ops::silu(c(h));
    f.layers.push_back(h);
  }
  const int ch = h.dim(0), n = h.dim(1) * h.dim(2);
  f.pooled = ops::transpose(ops::scale(ops::matmul(ops::reshape(h, {ch, n}), Tensor::full({n, 1}, 1.0)), 1.0 / n));
  f.logits = head(f.pooled);
  return f;
}

std::vector<double> Evaluator::posterior(const data::Image& image) const {
  NoGradGuard ng;
  return ops::softmax_rows(forward(image).logits).values();
}

std::vector<double> Evaluator::features(const data::Image& image) const {
  NoGradGuard ng;
  return forward(image).pooled.values();
}

int Evaluator::classify(const data::Image& image) const {
  const auto p = posterior(image);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void Evaluator::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  for (std::size_t i = 0; i < convs.size(); ++i) convs[i].visit(prefix + "conv" + std::to_string(i) + ".", v);
  head.visit(prefix + "head.", v);
}

data::Image augment(const data::Image& img, Rng& rng) {
  const int dy = rng.uniform_int(-6, 6), dx = rng.uniform_int(-6, 6);
  const double gain = rng.uniform(0.7, 1.3), bias = rng.uniform(-0.1, 0.1), noise = rng.uniform(0.0, 0.08);
  const bool blur = rng.bernoulli(0.5);
  data::Image src = img;
  if (blur) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          double s = 0;
          int n = 0;
          for (int oy = -1; oy <= 1; ++oy)
            for (int ox = -1; ox <= 1; ++ox) {
              const int yy = y + oy, xx = x + ox;
              if (yy < 0 || xx < 0 || yy >= img.height || xx >= img.width) continue;
              s += img.at(yy, xx, c);
              ++n;
            }
          src.at(y, x, c) = s / n;
        }
  }
  data::Image out = data::Image::blank(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sy = std::clamp(y - dy, 0, img.height - 1), sx = std::clamp(x - dx, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = std::clamp(gain * src.at(sy, sx, c) + bias + noise * rng.normal(), 0.0, 1.0);
    }
  return out;
}

Evaluator train_evaluator(const std::vector<LabeledImageRef>& images, int num_classes, const EvaluatorTrainOptions& opt) {
  if (images.empty()) throw ArgumentError("evaluator training needs images");
  Evaluator e = Evaluator::make(images.front().image->height, num_classes, opt.seed);
  for (const auto& li : images) {
    e.check_image(*li.image);
    if (li.label < 0 || li.label >= num_classes) throw ArgumentError("evaluator label out of range");
  }
  nn::set_trainable(e, true);
  Adam adam(nn::collect(e), {opt.learning_rate});
  const int batch = std::max(1, opt.batch_size);
  for (int step = 0; step < opt.steps; ++step) {
    Rng rng(derive_seed(opt.seed, {0x65747261ULL, static_cast<std::uint64_t>(step)}));
    double total = 0;
    for (int b = 0; b < batch; ++b) {
      const auto& li = images[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(images.size()) - 1))];
      Tensor loss = ops::cross_entropy(e.forward(augment(*li.image, rng)).logits, li.label);
      total += loss.item();
      backward(loss, 1.0 / batch);
    }
    if (!std::isfinite(total)) throw NumericError("evaluator training diverged");
    adam.step();
    if (step % 100 == 0) log::debug("evaluator step " + std::to_string(step) + " loss " + std::to_string(total / batch));
  }
  nn::set_trainable(e, false);
  return e;
}

void save_evaluator(const Evaluator& e, const std::string& path) {
  Checkpoint ck;
  ck.kind = "e2i.evaluator";
  ck.meta = {{"id", e.id}, {"image_size", e.image_size}, {"num_classes", e.num_classes}};
  ck.put_params(nn::collect(const_cast<Evaluator&>(e)));
  save_checkpoint(ck, path);
}

Evaluator load_evaluator(const std::string& path) {
  Checkpoint ck = load_checkpoint(path, "e2i.evaluator");
  try {
    Evaluator e = Evaluator::make(ck.meta.at("image_size"), ck.meta.at("num_classes"), 0);
    e.id = ck.meta.at("id");
    auto params = nn::collect(e);
    ck.load_params(params);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError("malformed evaluator metadata in " + path + ": " + ex.what());
  }
}

}  // namespace e2i::metrics
