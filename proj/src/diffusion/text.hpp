#pragma once

#include <string>
#include <vector>

#include "core/nn.hpp"

namespace e2i::diffusion {

// Word-level caption embedder: learned token table plus positional table.
// The empty caption maps to a single <null> token so attention always has a
// context to attend to.
struct TextEmbedder {
  std::vector<std::string> vocab;  // index 0 <null>, 1 <unk>
  int dim = 32;
  int max_tokens = 8;
  Tensor token_table;  // [V, dim]
  Tensor pos_table;    // [max_tokens, dim]

  static TextEmbedder make(const std::vector<std::string>& class_names, int dim, std::uint64_t seed);

  std::vector<int> tokenize(const std::string& caption) const;
  // [n_tokens, dim]
  Tensor embed(const std::string& caption) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& v);
};

}  // namespace e2i::diffusion
