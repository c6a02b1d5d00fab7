#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "data/eeg.hpp"

namespace e2i::data {

enum class DatasetName { Eegcvpr40, Thoughtviz, Synthetic };

std::string to_string(DatasetName n);
// Throws ArgumentError on unknown names.
DatasetName parse_dataset_name(const std::string& s);

struct SampleEntry {
  std::string id;
  std::string eeg_file;    // relative to the dataset directory
  std::string image_file;  // relative to the dataset directory
  int subject_id = 0;
  int class_label = 0;
  bool operator==(const SampleEntry&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct DatasetManifest {
  DatasetName dataset_name = DatasetName::Synthetic;
  int num_classes = 0;
  std::vector<std::string> class_names;
  int channels = 0;
  int window_length = 0;
  double sample_rate_hz = 1.0;
  int image_size = 0;
  std::map<std::string, std::vector<std::string>> splits;
  std::vector<int> subjects;
  std::vector<SampleEntry> samples;

  // Disjoint splits, known sample ids, labels in range.
  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text, const std::string& origin);

struct Dataset {
  DatasetManifest manifest;
  std::vector<PairedSample> samples;
};

// File-name-safe form of an id: characters outside [A-Za-z0-9._-] become '_'.
std::string sanitize(const std::string& s);

// Canonical layout: manifest.json, eeg/<id>.npy [C x L] float32, images/*.png.
// Writing the same dataset twice produces identical files.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest,
                   const std::vector<PairedSample>& samples);

DatasetManifest read_manifest(const std::filesystem::path& dir);

// Loads one split ("all" loads every sample). Unknown split names are an
// ArgumentError; missing files are an IoError naming the path.
Dataset load_dataset(const std::filesystem::path& dir, const std::string& split);

}  // namespace e2i::data
