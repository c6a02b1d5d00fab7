#include "decoder/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/adam.hpp"
#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/log.hpp"
#include "diffusion/backbone.hpp"

namespace e2i::decoder {

DecoderWeights DecoderWeights::make(int channels, int hidden, int num_classes, std::uint64_t seed) {
  if (channels < 1 || hidden < 1 || num_classes < 2) throw ConfigError("decoder needs channels, hidden units and two or more classes");
  Rng rng(derive_seed(seed, {0x6c73746dULL}));
  DecoderWeights w;
  w.channels = channels;
  w.hidden = hidden;
  w.num_classes = num_classes;
  w.input = nn::Linear::make(channels, 4 * hidden, rng);
  w.recurrent = nn::init_uniform({4 * hidden, hidden}, hidden, rng);
  // Forget-gate bias starts at 1.
  auto b = w.input.bias.mutable_data();
  for (int i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
  w.head = nn::Linear::make(hidden, num_classes, rng);
  return w;
}

Tensor DecoderWeights::logits(const Tensor& eeg) const {
  if (eeg.ndim() != 2 || eeg.dim(0) != channels)
    throw ArgumentError("decoder expects " + std::to_string(channels) + " channels, got " + shape_str(eeg.shape()));
  const int steps = eeg.dim(1);
  // Input contributions for all steps at once: [L, 4H].
  Tensor gates_in = input(ops::transpose(eeg));
  Tensor rt = ops::transpose(recurrent);
  Tensor h = Tensor::zeros({1, hidden});
  Tensor c = Tensor::zeros({1, hidden});
  for (int t = 0; t < steps; ++t) {
    Tensor g = ops::add(ops::slice0(gates_in, t, 1), ops::matmul(h, rt));
    Tensor i = ops::sigmoid(ops::slice_cols(g, 0, hidden));
    Tensor f = ops::sigmoid(ops::slice_cols(g, hidden, hidden));
    Tensor u = ops::tanh(ops::slice_cols(g, 2 * hidden, hidden));
    Tensor o = ops::sigmoid(ops::slice_cols(g, 3 * hidden, hidden));
    c = ops::add(ops::mul(f, c), ops::mul(i, u));
    h = ops::mul(o, ops::tanh(c));
  }
  return head(h);
}

void DecoderWeights::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  input.visit(prefix + "input.", v);
  v(prefix + "recurrent", recurrent);
  head.visit(prefix + "head.", v);
}

DecoderWeights train_decoder(const std::vector<LabeledEEG>& data, int num_classes, const DecoderTrainOptions& opt) {
  if (data.empty()) throw ArgumentError("decoder training needs data");
  std::set<int> classes;
  for (const auto& d : data) {
    if (d.label < 0 || d.label >= num_classes) throw ArgumentError("label " + std::to_string(d.label) + " out of range");
    classes.insert(d.label);
  }
  if (classes.size() < 2) throw ArgumentError("decoder training needs at least two classes, found " + std::to_string(classes.size()));
  const int channels = data.front().eeg.dim(0);
  DecoderWeights w = DecoderWeights::make(channels, opt.hidden, num_classes, opt.seed);
  nn::set_trainable(w, true);
  Adam adam(nn::collect(w), {opt.learning_rate});
  const int batch = std::max(1, opt.batch_size);
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(opt.seed, {0x6465636fULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      for (std::size_t k = start; k < end; ++k) {
        const auto& d = data[order[k]];
        Tensor loss = ops::cross_entropy(w.logits(d.eeg), d.label);
        total += loss.item();
        backward(loss, 1.0 / static_cast<double>(end - start));
      }
      adam.step();
    }
    if (!std::isfinite(total)) throw NumericError("decoder training diverged in epoch " + std::to_string(epoch));
    log::debug("decoder epoch " + std::to_string(epoch) + " loss " + std::to_string(total / data.size()));
  }
  nn::set_trainable(w, false);
  w.frozen = true;
  return w;
}

int decode_label(const Tensor& eeg, const DecoderWeights& w) {
  NoGradGuard ng;
  const auto v = w.logits(eeg).values();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double decoder_accuracy(const std::vector<LabeledEEG>& data, const DecoderWeights& w) {
  if (data.empty()) throw ArgumentError("no data to score");
  int hits = 0;
  for (const auto& d : data) hits += decode_label(d.eeg, w) == d.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::string make_caption(int label, const std::vector<std::string>& class_names) {
  if (label < 0 || label >= static_cast<int>(class_names.size()))
    throw ArgumentError("label " + std::to_string(label) + " outside the class table of " +
                        std::to_string(class_names.size()));
  return diffusion::make_caption_text(class_names[label]);
}

void save_decoder(const DecoderWeights& w, const std::string& path) {
  Checkpoint ck;
  ck.kind = "e2i.decoder";
  ck.meta = {{"channels", w.channels}, {"hidden", w.hidden}, {"num_classes", w.num_classes}, {"frozen", w.frozen}};
  ck.put_params(nn::collect(const_cast<DecoderWeights&>(w)));
  save_checkpoint(ck, path);
}

DecoderWeights load_decoder(const std::string& path) {
  Checkpoint ck = load_checkpoint(path, "e2i.decoder");
  try {
    DecoderWeights w = DecoderWeights::make(ck.meta.at("channels"), ck.meta.at("hidden"), ck.meta.at("num_classes"), 0);
    auto params = nn::collect(w);
    ck.load_params(params);
    w.frozen = true;
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed decoder metadata in " + path + ": " + e.what());
  }
}

}  // namespace e2i::decoder
