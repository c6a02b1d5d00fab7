#include "diffusion/text.hpp"

#include <algorithm>
#include <cctype>

#include "core/error.hpp"

namespace e2i::diffusion {

namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TextEmbedder TextEmbedder::make(const std::vector<std::string>& class_names, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("text embedding width must be positive");
  TextEmbedder t;
  t.dim = dim;
  t.vocab = {"<null>", "<unk>", "image", "of"};
  for (const auto& name : class_names)
    for (const auto& w : words(name))
      if (std::find(t.vocab.begin(), t.vocab.end(), w) == t.vocab.end()) t.vocab.push_back(w);
  Rng rng(derive_seed(seed, {0x74657874ULL}));
  const int v = static_cast<int>(t.vocab.size());
  t.token_table = Tensor::param({v, dim}, rng.normals(static_cast<std::size_t>(v) * dim));
  std::vector<double> pos = rng.normals(static_cast<std::size_t>(t.max_tokens) * dim);
  for (auto& p : pos) p *= 0.1;
  t.pos_table = Tensor::param({t.max_tokens, dim}, std::move(pos));
  return t;
}

std::vector<int> TextEmbedder::tokenize(const std::string& caption) const {
  std::vector<int> ids;
  for (const auto& w : words(caption)) {
    auto it = std::find(vocab.begin(), vocab.end(), w);
    ids.push_back(it == vocab.end() ? 1 : static_cast<int>(it - vocab.begin()));
    if (static_cast<int>(ids.size()) == max_tokens) break;
  }
  if (ids.empty()) ids.push_back(0);
  return ids;
}

Tensor TextEmbedder::embed(const std::string& caption) const {
  const auto ids = tokenize(caption);
  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  return ops::add(ops::gather_rows(token_table, ids), ops::gather_rows(pos_table, pos));
}

void TextEmbedder::visit(const std::string& prefix, const nn::ParamVisitor& v) {
  v(prefix + "token_table", token_table);
  v(prefix + "pos_table", pos_table);
}

}  // namespace e2i::diffusion
