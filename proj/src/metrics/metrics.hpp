#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics/evaluator.hpp"

namespace e2i::metrics {

struct ScoreSummary {
  double mean = 0;
  double std = 0;
};

// exp(E_x KL(p(y|x) || p(y))) per split, summarized over splits. Splits are
// contiguous and near-equal in size. ArgumentError when there are fewer
// posteriors than splits.
ScoreSummary inception_score(const std::vector<std::vector<double>>& posteriors, int splits);

// Frechet distance between Gaussian fits of two feature sets.
double fid(const std::vector<std::vector<double>>& real, const std::vector<std::vector<double>>& generated);

// For pair i: the candidate set is targets[i] plus n - 1 other classes drawn
// without replacement from a stream seeded by (seed, i). Success when fewer
// than k candidates outscore the target in scores[i].
double nway_topk_acc(const std::vector<int>& targets, const std::vector<std::vector<double>>& scores, int n, int k,
                     std::uint64_t seed);

// Per-position unit-normalized feature maps, squared differences summed
// over channels, averaged over positions, averaged over layers.
double lpips_features(const std::vector<Tensor>& a, const std::vector<Tensor>& b);
double lpips(const data::Image& a, const data::Image& b, const Evaluator& net);

struct EvalPair {
  std::string ground_truth;
  std::string generated;
  int class_label = 0;
};

struct EvalManifest {
  std::vector<EvalPair> pairs;
  std::string feature_extractor;
  std::string classifier;
  int n_way = 50;
  int top_k = 1;
  int is_splits = 10;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
  nlohmann::json extra = nlohmann::json::object();

  void validate() const;
};

nlohmann::json eval_manifest_to_json(const EvalManifest& m);
// Relative paths are resolved against base_dir.
EvalManifest eval_manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
EvalManifest read_eval_manifest(const std::filesystem::path& path);
void write_eval_manifest(const EvalManifest& m, const std::filesystem::path& path);

struct MetricsReport {
  double is_mean = 0, is_std = 0;
  double fid = 0;
  double acc = 0;
  double lpips_mean = 0;
  std::size_t sample_count = 0;
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
// One row in the IS / FID / ACC / LPIPS layout.
std::string report_row(const std::string& label, const MetricsReport& r);
std::string report_table_header();

// Loads every image, then computes all four metrics with the shared
// evaluator. IoError lists every missing file.
MetricsReport evaluate_run(const EvalManifest& m, const Evaluator& net);

}  // namespace e2i::metrics
