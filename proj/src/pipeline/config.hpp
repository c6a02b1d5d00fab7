#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "projection/projection.hpp"

namespace e2i::pipeline {

struct DatasetSection {
  std::string name = "synthetic";
  std::string root;  // canonical layout written by ingest or synth
  std::string split = "train";
  std::string eval_split = "test";
  std::vector<int> subjects;  // empty: all
};

struct BackboneSection {
  std::string kind = "toy";
  std::string path;
  int vae_steps = 600;
  int unet_steps = 2000;
  double learning_rate = 1e-3;
};

struct TrainingSection {
  int epochs = 100;
  long max_steps = 0;  // > 0 caps the run
  double learning_rate = 1e-5;
  std::string optimizer = "adam";
  int batch_size = 16;
  bool drop_enabled = false;
  int checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  bool resume = true;
};

struct SamplingSection {
  int steps = 50;
  bool guess_mode = false;
  std::vector<double> scales;
  double guidance_scale = 1.0;
  bool stochastic = false;
  std::string selector = "all";
  int limit = 0;
};

struct EvaluationSection {
  int n_way = 50;
  int top_k = 1;
  int is_splits = 10;
};

struct DecoderSection {
  std::string path;
  int epochs = 30;
  double learning_rate = 3e-3;
  int hidden = 128;
};

struct EvaluatorSection {
  std::string path;
  int steps = 400;
};

struct AblationSection {
  std::string checkpoint_drop;
  std::string checkpoint_nodrop;
};

struct PathsSection {
  std::string checkpoint_dir = "runs/checkpoints";
  std::string output_dir = "runs/output";
};

struct ProjectionSection {
  std::vector<int> channel_widths{320, 640, 1280, 2560};
  std::vector<int> strides{5, 2, 2, 2};
  int kernel_size = 3;
  int min_length = 0;  // 0: the dataset window length
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  DatasetSection dataset;
  BackboneSection backbone;
  ProjectionSection projection;
  TrainingSection training;
  SamplingSection sampling;
  EvaluationSection evaluation;
  DecoderSection decoder;
  EvaluatorSection evaluator;
  AblationSection ablation;
  PathsSection paths;

  std::uint64_t require_seed() const;
  // Structural checks shared by every command; ConfigError on failure.
  void validate() const;
  projection::ProjectionConfig projection_config(int in_channels, int window_length) const;
};

nlohmann::json config_to_json(const RunConfig& c);
// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
// "section.key=value"; value parsed as JSON when possible, else as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Resolves a weights path: relative paths are looked up under the
// directory in E2I_WEIGHTS_DIR when that variable is set and the path does
// not exist as given.
std::string resolve_weights_path(const std::string& path);

}  // namespace e2i::pipeline
