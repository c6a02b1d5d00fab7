#pragma once

#include <functional>
#include <string>

#include <json.hpp>

#include "data/synth.hpp"
#include "diffusion/engine.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/config.hpp"

namespace e2i::pipeline {

// stage, units done, units total.
using ProgressFn = std::function<void(const std::string&, long, long)>;

inline constexpr const char* kRunCheckpointKind = "e2i.run";
inline constexpr const char* kRunCheckpointFile = "run.e2i";
inline constexpr const char* kLossLogFile = "loss_log.jsonl";

void cmd_synth(const data::SynthOptions& opt, const std::string& out_dir);

struct IngestArgs {
  std::string format;  // "eegcvpr40" or "thoughtviz"
  std::string raw_root;
  std::string out_dir;
  int image_size = 64;
  int window_length = 32;
  double overlap_fraction = 0.5;
  int test_every = 5;
};

// Converts a raw archive into the canonical layout. Rerunning rewrites
// identical files.
data::DatasetManifest cmd_ingest(const IngestArgs& args);

void cmd_train_backbone(const RunConfig& cfg, const ProgressFn& progress = {});
// Returns held-out accuracy on the evaluation split.
double cmd_train_decoder(const RunConfig& cfg, const ProgressFn& progress = {});
void cmd_train_evaluator(const RunConfig& cfg, const ProgressFn& progress = {});

struct TrainSummary {
  long steps = 0;          // total after this run
  long resumed_from = 0;   // 0 for a fresh run
  double last_loss = 0;
  long samples = 0;        // cumulative over the whole run, resumes included
  long captions_dropped = 0;
  std::string checkpoint_path;
  std::string checkpoint_id;
};

// Stops after stop_after steps of this invocation when positive (used to
// simulate interruption); the checkpoint is still written.
TrainSummary cmd_train(const RunConfig& cfg, const ProgressFn& progress = {}, long stop_after = 0);

struct RunCheckpoint {
  diffusion::ControlState state;
  long step = 0;
  std::string checkpoint_id;
  nlohmann::json meta;
};

// LoadError on a missing file, a foreign kind or a backbone fingerprint
// that differs from bb.
RunCheckpoint load_run_checkpoint(const std::string& path, const diffusion::Backbone& bb);

struct GenerateOptions {
  std::string checkpoint;  // empty: <checkpoint_dir>/run.e2i
  std::string output_dir;  // empty: sampling output_dir
  bool zero_eeg = false;
};

struct GenerateSummary {
  int count = 0;
  std::string manifest_path;
  std::string checkpoint_id;
};

GenerateSummary cmd_generate(const RunConfig& cfg, const GenerateOptions& opt = {}, const ProgressFn& progress = {});

// report_path empty: metrics_report.json next to the manifest. A text
// table is written alongside with a .txt extension.
metrics::MetricsReport cmd_evaluate(const std::string& manifest_path, const std::string& evaluator_path,
                                    const std::string& report_path = "");

// EEG-vs-zeroed-EEG block and the drop x guess grid in one report, written
// to <output_dir>/ablation_report.{json,txt}.
nlohmann::json cmd_ablate(const RunConfig& cfg, const ProgressFn& progress = {});
std::string ablation_table(const nlohmann::json& report);

// "all", or comma-joined terms subject=<n>, class=<n>, id=<text>; all
// terms must hold. ArgumentError on malformed selectors.
struct Selector {
  std::vector<std::pair<std::string, std::string>> terms;
  static Selector parse(const std::string& text);
  bool matches(const data::EEGRecording& e) const;
};

}  // namespace e2i::pipeline
