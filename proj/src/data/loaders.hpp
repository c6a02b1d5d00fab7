#pragma once

#include <filesystem>
#include <string>

#include "data/manifest.hpp"

namespace e2i::data {

// Raw EEGCVPR40 export layout under `root`:
//   eeg_data.npy       float [N x 128 x L]
//   trials.csv         index,subject,label,image   (one row per trial)
//   labels.txt         40 class names, one per line
//   images/<image>.*   stimulus images (JPEG or PNG)
//   splits/{train,val,test}.txt   trial indices, one per line
struct Eegcvpr40Options {
  int image_size = 512;
  bool load_images = true;
};

inline constexpr int kEegcvpr40Channels = 128;
inline constexpr int kEegcvpr40Classes = 40;
inline constexpr int kEegcvpr40Subjects = 6;

// Trials of one official split, standardized per recording. The returned
// manifest lists only that split.
Dataset load_eegcvpr40(const std::filesystem::path& root, const std::string& split,
                       const Eegcvpr40Options& opt = {});

// Raw ThoughtViz export layout under `root`:
//   recordings.csv     file,subject,label   (one row per continuous recording)
//   eeg/<file>         float [14 x L] .npy
//   classes.txt        10 class names, one per line
//   images/<class>.*   one exemplar image per class
struct ThoughtvizOptions {
  int window_length = 32;
  double overlap_fraction = 0.5;
  double sample_rate_hz = 128.0;
  int image_size = 512;
  bool load_images = true;
  // Every k-th recording of each class (k = test_every) goes to "test".
  int test_every = 5;
};

inline constexpr int kThoughtvizChannels = 14;
inline constexpr int kThoughtvizClasses = 10;

// Recordings are standardized, then chunked into windows. Windows of one
// recording always share a split.
Dataset load_thoughtviz(const std::filesystem::path& root, const ThoughtvizOptions& opt = {});

}  // namespace e2i::data
