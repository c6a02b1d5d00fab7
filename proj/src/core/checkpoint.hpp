#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "core/nn.hpp"

namespace e2i {

// Versioned binary container: magic, little-endian u64 header length, JSON
// header, then raw float64 tensor payloads in header order.
inline constexpr char kCheckpointMagic[8] = {'E', '2', 'I', 'C', 'K', 'P', 'T', '\0'};
inline constexpr int kCheckpointVersion = 1;

struct StoredTensor {
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, StoredTensor> tensors;

  void put(const std::string& name, const Tensor& t);
  void put(const std::string& name, Shape shape, std::vector<double> values);
  void put_params(const nn::NamedParams& params, const std::string& prefix = "");
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  const StoredTensor& get(const std::string& name) const;
  // Copies stored values into each parameter; LoadError on missing names or
  // shape mismatch.
  void load_params(nn::NamedParams& params, const std::string& prefix = "") const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
// expected_kind empty accepts any kind.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_kind = "");

// FNV-1a over a text description; used for architecture fingerprints.
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t v);
// Fingerprint of parameter names and shapes.
std::string params_fingerprint(const nn::NamedParams& params, const std::string& extra = "");

}  // namespace e2i
