#include "core/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"

namespace e2i {

using nlohmann::json;

void Checkpoint::put(const std::string& name, const Tensor& t) { put(name, t.shape(), t.values()); }

void Checkpoint::put(const std::string& name, Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) throw InternalError("checkpoint tensor '" + name + "' size mismatch");
  tensors[name] = {std::move(shape), std::move(values)};
}

void Checkpoint::put_params(const nn::NamedParams& params, const std::string& prefix) {
  for (const auto& [n, t] : params) put(prefix + n, t);
}

const StoredTensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw LoadError("checkpoint (" + kind + ") lacks tensor '" + name + "'");
  return it->second;
}

void Checkpoint::load_params(nn::NamedParams& params, const std::string& prefix) const {
  for (auto& [n, t] : params) {
    const auto& s = get(prefix + n);
    if (s.shape != t.shape())
      throw LoadError("checkpoint tensor '" + prefix + n + "' has shape " + shape_str(s.shape) + ", expected " +
                      shape_str(t.shape()));
    std::copy(s.values.begin(), s.values.end(), t.mutable_data().begin());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json header;
  header["version"] = kCheckpointVersion;
  header["kind"] = ck.kind;
  header["meta"] = ck.meta;
  json entries = json::array();
  for (const auto& [name, t] : ck.tensors) entries.push_back({{"name", name}, {"shape", t.shape}});
  header["tensors"] = entries;
  const std::string text = header.dump();

  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint64_t n = text.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(text.data(), static_cast<std::streamsize>(n));
    for (const auto& [_, t] : ck.tensors)
      out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint: " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw LoadError("not an e2i checkpoint: " + path);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1u << 28)) throw LoadError("corrupt checkpoint header: " + path);
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  if (header.value("version", 0) != kCheckpointVersion)
    throw LoadError("unsupported checkpoint version in " + path);
  Checkpoint ck;
  ck.kind = header.value("kind", "");
  if (!expected_kind.empty() && ck.kind != expected_kind)
    throw LoadError("checkpoint " + path + " holds '" + ck.kind + "', expected '" + expected_kind + "'");
  ck.meta = header.value("meta", json::object());
  for (const auto& e : header.at("tensors")) {
    StoredTensor t;
    t.shape = e.at("shape").get<Shape>();
    t.values.resize(shape_numel(t.shape));
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!in) throw LoadError("truncated checkpoint: " + path);
    ck.tensors[e.at("name").get<std::string>()] = std::move(t);
  }
  return ck;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string params_fingerprint(const nn::NamedParams& params, const std::string& extra) {
  std::string desc = extra;
  for (const auto& [n, t] : params) desc += ";" + n + shape_str(t.shape());
  return hex64(fnv1a(desc));
}

}  // namespace e2i
