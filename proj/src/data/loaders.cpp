#include "data/loaders.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <map>
#include <sstream>
#include <unordered_map>

#include "core/error.hpp"
#include "data/npy.hpp"

namespace e2i::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("missing dataset file: " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

int to_int(const std::string& s, const fs::path& where) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("bad integer '" + s + "' in " + where.string());
  }
}

// CSV rows keyed by header name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p,
                                                         const std::vector<std::string>& required) {
  auto lines = read_lines(p);
  if (lines.empty()) throw IoError("empty CSV file: " + p.string());
  auto header = split_csv(lines[0]);
  for (const auto& r : required)
    if (std::find(header.begin(), header.end(), r) == header.end())
      throw IoError("CSV " + p.string() + " lacks column '" + r + "'");
  std::vector<std::map<std::string, std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split_csv(lines[i]);
    if (f.size() != header.size()) throw IoError("CSV " + p.string() + " line " + std::to_string(i + 1) + " has wrong field count");
    std::map<std::string, std::string> row;
    for (std::size_t c = 0; c < f.size(); ++c) row[header[c]] = f[c];
    rows.push_back(std::move(row));
  }
  return rows;
}

fs::path find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {"", ".JPEG", ".jpeg", ".jpg", ".JPG", ".png", ".PNG"}) {
    fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  throw IoError("missing stimulus image for '" + stem + "' under " + dir.string());
}

std::shared_ptr<const Image> load_resized(const fs::path& p, int size,
                                          std::unordered_map<std::string, std::shared_ptr<const Image>>& cache) {
  auto& slot = cache[p.string()];
  if (!slot) slot = std::make_shared<const Image>(resize_bilinear(read_image(p.string()), size, size));
  return slot;
}

}  // namespace

Dataset load_eegcvpr40(const fs::path& root, const std::string& split, const Eegcvpr40Options& opt) {
  if (split != "train" && split != "val" && split != "test")
    throw ArgumentError("unknown EEGCVPR40 split '" + split + "' (expected train, val or test)");
  if (!fs::is_directory(root)) throw IoError("dataset root does not exist: " + root.string());

  const fs::path eeg_path = root / "eeg_data.npy";
  if (!fs::exists(eeg_path)) throw IoError("missing EEG archive: " + eeg_path.string());
  NdArray eeg = read_npy(eeg_path.string());
  if (eeg.shape.size() != 3) throw IoError("EEG archive must be [N x C x L]: " + eeg_path.string());
  const auto n = eeg.shape[0];
  const int channels = static_cast<int>(eeg.shape[1]);
  const int length = static_cast<int>(eeg.shape[2]);
  if (channels != kEegcvpr40Channels)
    throw IoError("EEG archive has " + std::to_string(channels) + " channels, expected 128: " + eeg_path.string());

  const auto class_names = read_lines(root / "labels.txt");
  if (static_cast<int>(class_names.size()) != kEegcvpr40Classes)
    throw IoError("labels.txt must list 40 classes: " + (root / "labels.txt").string());
  const auto trials = read_csv(root / "trials.csv", {"index", "subject", "label", "image"});
  if (trials.size() != n)
    throw IoError("trials.csv has " + std::to_string(trials.size()) + " rows for " + std::to_string(n) + " EEG trials");
  std::vector<const std::map<std::string, std::string>*> by_index(n, nullptr);
  for (const auto& row : trials) {
    const int idx = to_int(row.at("index"), root / "trials.csv");
    if (idx < 0 || static_cast<std::size_t>(idx) >= n || by_index[idx])
      throw IoError("trials.csv has a bad or repeated index " + row.at("index"));
    by_index[idx] = &row;
  }

  const fs::path split_file = root / "splits" / (split + ".txt");
  const auto members = read_lines(split_file);

  Dataset ds;
  auto& m = ds.manifest;
  m.dataset_name = DatasetName::Eegcvpr40;
  m.num_classes = kEegcvpr40Classes;
  m.class_names = class_names;
  m.channels = channels;
  m.window_length = length;
  m.sample_rate_hz = 1000.0;
  m.image_size = opt.image_size;
  for (int s = 1; s <= kEegcvpr40Subjects; ++s) m.subjects.push_back(s);
  m.splits[split] = {};

  std::unordered_map<std::string, std::shared_ptr<const Image>> cache;
  const std::size_t per_trial = static_cast<std::size_t>(channels) * length;
  for (const auto& line : members) {
    const int idx = to_int(line, split_file);
    if (idx < 0 || static_cast<std::size_t>(idx) >= n)
      throw IoError("split file " + split_file.string() + " references trial " + line + " out of range");
    const auto& row = *by_index[idx];
    EEGRecording e;
    e.id = "t" + std::to_string(idx);
    e.channels = channels;
    e.length = length;
    e.samples.assign(eeg.values.begin() + static_cast<std::ptrdiff_t>(idx * per_trial),
                     eeg.values.begin() + static_cast<std::ptrdiff_t>((idx + 1) * per_trial));
    e.subject_id = to_int(row.at("subject"), root / "trials.csv");
    e.class_label = to_int(row.at("label"), root / "trials.csv");
    e.stimulus_ref = row.at("image");
    e.sample_rate_hz = m.sample_rate_hz;
    if (e.subject_id < 1 || e.subject_id > kEegcvpr40Subjects)
      throw IoError("trial " + line + " has subject " + row.at("subject") + " outside 1..6");
    e.validate(m.num_classes);
    PairedSample ps;
    ps.eeg = standardize(e).eeg;
    ps.image_path = find_image(root / "images", e.stimulus_ref).string();
    if (opt.load_images) ps.image = load_resized(ps.image_path, opt.image_size, cache);
    m.splits[split].push_back(e.id);
    m.samples.push_back({e.id, "eeg/" + e.id + ".npy", "images/" + e.stimulus_ref + ".png", e.subject_id, e.class_label});
    ds.samples.push_back(std::move(ps));
  }
  m.validate();
  return ds;
}

Dataset load_thoughtviz(const fs::path& root, const ThoughtvizOptions& opt) {
  if (!fs::is_directory(root)) throw IoError("dataset root does not exist: " + root.string());
  const fs::path csv = root / "recordings.csv";
  if (!fs::exists(csv)) throw IoError("missing ThoughtViz archive index: " + csv.string());
  const auto class_names = read_lines(root / "classes.txt");
  if (static_cast<int>(class_names.size()) != kThoughtvizClasses)
    throw IoError("classes.txt must list 10 classes: " + (root / "classes.txt").string());
  const auto rows = read_csv(csv, {"file", "subject", "label"});
  if (rows.empty()) throw IoError("ThoughtViz archive lists no recordings: " + csv.string());

  Dataset ds;
  auto& m = ds.manifest;
  m.dataset_name = DatasetName::Thoughtviz;
  m.num_classes = kThoughtvizClasses;
  m.class_names = class_names;
  m.channels = kThoughtvizChannels;
  m.window_length = opt.window_length;
  m.sample_rate_hz = opt.sample_rate_hz;
  m.image_size = opt.image_size;
  m.splits["train"] = {};
  m.splits["test"] = {};

  std::unordered_map<std::string, std::shared_ptr<const Image>> cache;
  std::map<int, int> seen_per_class;
  std::set<int> subjects;
  for (const auto& row : rows) {
    const fs::path file = root / "eeg" / row.at("file");
    NdArray arr = read_npy(file.string());
    if (arr.shape.size() != 2 || static_cast<int>(arr.shape[0]) != kThoughtvizChannels)
      throw IoError("ThoughtViz recording must be [14 x L]: " + file.string());
    EEGRecording rec;
    rec.id = fs::path(row.at("file")).stem().string();
    rec.channels = kThoughtvizChannels;
    rec.length = static_cast<int>(arr.shape[1]);
    rec.samples = std::move(arr.values);
    rec.subject_id = to_int(row.at("subject"), csv);
    rec.class_label = to_int(row.at("label"), csv);
    rec.stimulus_ref = class_names.at(static_cast<std::size_t>(std::clamp(rec.class_label, 0, kThoughtvizClasses - 1)));
    rec.sample_rate_hz = opt.sample_rate_hz;
    rec.validate(m.num_classes);
    subjects.insert(rec.subject_id);

    const int ordinal = seen_per_class[rec.class_label]++;
    const std::string split = (opt.test_every > 0 && ordinal % opt.test_every == opt.test_every - 1) ? "test" : "train";
    const fs::path img_path = find_image(root / "images", rec.stimulus_ref);
    auto img = opt.load_images ? load_resized(img_path, opt.image_size, cache) : nullptr;
    for (auto& w : chunk(standardize(rec).eeg, opt.window_length, opt.overlap_fraction)) {
      m.splits[split].push_back(w.id);
      m.samples.push_back({w.id, "eeg/" + w.id + ".npy", "images/" + w.stimulus_ref + ".png", w.subject_id, w.class_label});
      ds.samples.push_back({std::move(w), img_path.string(), img});
    }
  }
  m.subjects.assign(subjects.begin(), subjects.end());
  m.validate();
  return ds;
}

}  // namespace e2i::data
