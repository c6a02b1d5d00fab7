#pragma once

#include <string>
#include <vector>

#include "core/nn.hpp"
#include "data/image.hpp"

namespace e2i::metrics {

// Small image classifier shared by every metric: softmax posteriors for IS
// and ACC, pooled features for FID, per-layer maps for LPIPS.
struct Evaluator {
  std::string id = "e2i-glyph-cnn";
  int image_size = 64;
  int num_classes = 0;
  std::vector<nn::Conv2d> convs;  // stride-2 stages
  nn::Linear head;

  static Evaluator make(int image_size, int num_classes, std::uint64_t seed);

  struct Forward {
    std::vector<Tensor> layers;  // post-activation maps
    Tensor pooled;               // [1, F]
    Tensor logits;               // [1, K]
  };
  Forward forward(const data::Image& image) const;

  std::vector<double> posterior(const data::Image& image) const;
  std::vector<double> features(const data::Image& image) const;
  int classify(const data::Image& image) const;

  void check_image(const data::Image& image) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

struct EvaluatorTrainOptions {
  int steps = 400;
  int batch_size = 8;
  double learning_rate = 2e-3;
  std::uint64_t seed = 1;
};

struct LabeledImageRef {
  const data::Image* image;
  int label;
};

// Trains on randomly shifted, blurred, recolored and noised copies of the
// labeled images so it tolerates imperfect generations.
Evaluator train_evaluator(const std::vector<LabeledImageRef>& images, int num_classes, const EvaluatorTrainOptions& opt);

// The augmentation used during training, exposed for tests.
data::Image augment(const data::Image& img, Rng& rng);

void save_evaluator(const Evaluator& e, const std::string& path);
Evaluator load_evaluator(const std::string& path);

}  // namespace e2i::metrics
