#pragma once

#include <string>
#include <vector>

#include "core/nn.hpp"
#include "data/eeg.hpp"

namespace e2i::decoder {

// Single-layer LSTM over EEG time steps with a linear head on the last
// hidden state. Gate order in the stacked weights: input, forget, cell,
// output.
struct DecoderWeights {
  int channels = 0;
  int hidden = 128;
  int num_classes = 0;
  bool frozen = false;
  nn::Linear input;  // [4H, C]
  Tensor recurrent;  // [4H, H], no bias
  nn::Linear head;   // [K, H]

  static DecoderWeights make(int channels, int hidden, int num_classes, std::uint64_t seed);
  // Class scores [1, K] for a standardized [C, L] recording.
  Tensor logits(const Tensor& eeg) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

struct DecoderTrainOptions {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 3e-3;
  int hidden = 128;
  std::uint64_t seed = 1;
};

struct LabeledEEG {
  Tensor eeg;  // [C, L]
  int label = 0;
};

// Cross-entropy training. ArgumentError when fewer than two classes occur.
DecoderWeights train_decoder(const std::vector<LabeledEEG>& data, int num_classes, const DecoderTrainOptions& opt);

// Argmax of the class scores. ArgumentError on a channel mismatch.
int decode_label(const Tensor& eeg, const DecoderWeights& w);
double decoder_accuracy(const std::vector<LabeledEEG>& data, const DecoderWeights& w);

// "Image of <name>". ArgumentError for an out-of-range label.
std::string make_caption(int label, const std::vector<std::string>& class_names);
inline const std::string kEmptyCaption;

void save_decoder(const DecoderWeights& w, const std::string& path);
DecoderWeights load_decoder(const std::string& path);

}  // namespace e2i::decoder
