#include "data/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "core/error.hpp"
#include "data/npy.hpp"

namespace e2i::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DatasetName n) {
  switch (n) {
    case DatasetName::Eegcvpr40: return "eegcvpr40";
    case DatasetName::Thoughtviz: return "thoughtviz";
    case DatasetName::Synthetic: return "synthetic";
  }
  return "unknown";
}

DatasetName parse_dataset_name(const std::string& s) {
  if (s == "eegcvpr40") return DatasetName::Eegcvpr40;
  if (s == "thoughtviz") return DatasetName::Thoughtviz;
  if (s == "synthetic") return DatasetName::Synthetic;
  throw ArgumentError("unknown dataset name '" + s + "' (expected eegcvpr40, thoughtviz or synthetic)");
}

void DatasetManifest::validate() const {
  if (num_classes < 1) throw ArgumentError("manifest: num_classes must be positive");
  if (static_cast<int>(class_names.size()) != num_classes)
    throw ArgumentError("manifest: class_names has " + std::to_string(class_names.size()) +
                        " entries for " + std::to_string(num_classes) + " classes");
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.id).second) throw ArgumentError("manifest: duplicate sample id " + s.id);
    if (s.class_label < 0 || s.class_label >= num_classes)
      throw ArgumentError("manifest: sample " + s.id + " label out of range");
  }
  std::set<std::string> used;
  for (const auto& [name, members] : splits)
    for (const auto& id : members) {
      if (!ids.count(id)) throw ArgumentError("manifest: split " + name + " references unknown sample " + id);
      if (!used.insert(id).second) throw ArgumentError("manifest: sample " + id + " appears in more than one split");
    }
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema"] = "e2i.dataset";
  j["schema_version"] = kManifestSchemaVersion;
  j["dataset_name"] = to_string(m.dataset_name);
  j["num_classes"] = m.num_classes;
  j["class_names"] = m.class_names;
  j["channels"] = m.channels;
  j["window_length"] = m.window_length;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["image_size"] = m.image_size;
  j["subjects"] = m.subjects;
  j["splits"] = json::object();
  for (const auto& [name, ids] : m.splits) j["splits"][name] = ids;
  j["samples"] = json::array();
  for (const auto& s : m.samples)
    j["samples"].push_back({{"id", s.id},
                            {"eeg", s.eeg_file},
                            {"image", s.image_file},
                            {"subject", s.subject_id},
                            {"label", s.class_label}});
  return j.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& origin) {
  DatasetManifest m;
  try {
    json j = json::parse(text);
    if (j.value("schema", "") != "e2i.dataset") throw IoError("not a dataset manifest: " + origin);
    const int ver = j.at("schema_version").get<int>();
    if (ver != kManifestSchemaVersion)
      throw IoError("unsupported manifest schema version " + std::to_string(ver) + " in " + origin);
    m.dataset_name = parse_dataset_name(j.at("dataset_name").get<std::string>());
    m.num_classes = j.at("num_classes").get<int>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.channels = j.at("channels").get<int>();
    m.window_length = j.at("window_length").get<int>();
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    m.image_size = j.at("image_size").get<int>();
    m.subjects = j.at("subjects").get<std::vector<int>>();
    for (auto& [name, ids] : j.at("splits").items()) m.splits[name] = ids.get<std::vector<std::string>>();
    for (const auto& s : j.at("samples"))
      m.samples.push_back({s.at("id").get<std::string>(), s.at("eeg").get<std::string>(),
                           s.at("image").get<std::string>(), s.at("subject").get<int>(),
                           s.at("label").get<int>()});
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + origin + ": " + e.what());
  }
  m.validate();
  return m;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  return out.empty() ? "unnamed" : out;
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_dataset(const fs::path& dir, const DatasetManifest& manifest_in,
                   const std::vector<PairedSample>& samples) {
  fs::create_directories(dir / "eeg");
  fs::create_directories(dir / "images");
  DatasetManifest manifest = manifest_in;
  manifest.samples.clear();
  std::set<std::string> written_images;
  for (const auto& s : samples) {
    s.eeg.validate(manifest.num_classes);
    SampleEntry e;
    e.id = s.eeg.id;
    e.eeg_file = "eeg/" + sanitize(s.eeg.id) + ".npy";
    e.image_file = "images/" + sanitize(s.eeg.stimulus_ref) + ".png";
    e.subject_id = s.eeg.subject_id;
    e.class_label = s.eeg.class_label;
    NdArray arr{{static_cast<std::size_t>(s.eeg.channels), static_cast<std::size_t>(s.eeg.length)}, s.eeg.samples};
    write_npy((dir / e.eeg_file).string(), arr);
    if (written_images.insert(e.image_file).second) {
      if (!s.image) throw ArgumentError("sample " + s.eeg.id + " has no resident stimulus image to write");
      write_png((dir / e.image_file).string(), *s.image);
    }
    manifest.samples.push_back(std::move(e));
  }
  manifest.validate();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest_to_json(manifest);
}

DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw IoError("missing dataset manifest: " + p.string());
  return manifest_from_json(read_text(p), p.string());
}

Dataset load_dataset(const fs::path& dir, const std::string& split) {
  Dataset ds{read_manifest(dir), {}};
  const auto& m = ds.manifest;
  std::vector<const SampleEntry*> picked;
  if (split == "all") {
    for (const auto& s : m.samples) picked.push_back(&s);
  } else {
    auto it = m.splits.find(split);
    if (it == m.splits.end()) throw ArgumentError("unknown split '" + split + "' in " + dir.string());
    std::unordered_map<std::string, const SampleEntry*> by_id;
    for (const auto& s : m.samples) by_id[s.id] = &s;
    for (const auto& id : it->second) picked.push_back(by_id.at(id));
  }
  std::unordered_map<std::string, std::shared_ptr<const Image>> images;
  for (const SampleEntry* e : picked) {
    const fs::path eeg_path = dir / e->eeg_file;
    NdArray arr = read_npy(eeg_path.string());
    if (arr.shape.size() != 2) throw IoError("expected a [C x L] array in " + eeg_path.string());
    PairedSample ps;
    ps.eeg.id = e->id;
    ps.eeg.channels = static_cast<int>(arr.shape[0]);
    ps.eeg.length = static_cast<int>(arr.shape[1]);
    ps.eeg.samples = std::move(arr.values);
    ps.eeg.subject_id = e->subject_id;
    ps.eeg.class_label = e->class_label;
    ps.eeg.stimulus_ref = fs::path(e->image_file).stem().string();
    ps.eeg.sample_rate_hz = m.sample_rate_hz;
    ps.eeg.validate(m.num_classes);
    if (m.channels > 0 && ps.eeg.channels != m.channels)
      throw IoError("channel count mismatch in " + eeg_path.string());
    ps.image_path = (dir / e->image_file).string();
    auto& img = images[ps.image_path];
    if (!img) {
      Image loaded = read_image(ps.image_path);
      if (m.image_size > 0) loaded = resize_bilinear(loaded, m.image_size, m.image_size);
      img = std::make_shared<const Image>(std::move(loaded));
    }
    ps.image = img;
    ds.samples.push_back(std::move(ps));
  }
  return ds;
}

}  // namespace e2i::data
