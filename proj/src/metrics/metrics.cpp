#include "metrics/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace e2i::metrics {

using nlohmann::json;
namespace fs = std::filesystem;

ScoreSummary inception_score(const std::vector<std::vector<double>>& posteriors, int splits) {
  if (splits < 1) throw ArgumentError("inception score needs at least one split");
  const std::size_t n = posteriors.size();
  if (n < static_cast<std::size_t>(splits))
    throw ArgumentError("inception score with " + std::to_string(splits) + " splits needs at least that many images, got " +
                        std::to_string(n));
  const std::size_t k = posteriors.front().size();
  for (const auto& p : posteriors)
    if (p.size() != k) throw ArgumentError("posteriors have inconsistent class counts");
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const std::size_t lo = n * s / splits, hi = n * (s + 1) / splits;
    std::vector<double> marginal(k, 0.0);
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t c = 0; c < k; ++c) marginal[c] += posteriors[i][c];
    for (auto& m : marginal) m /= static_cast<double>(hi - lo);
    double kl = 0;
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        const double p = posteriors[i][c];
        if (p > 0) kl += p * (std::log(p) - std::log(marginal[c]));
      }
    scores.push_back(std::exp(kl / static_cast<double>(hi - lo)));
  }
  ScoreSummary r;
  r.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / splits;
  for (double s : scores) r.std += (s - r.mean) * (s - r.mean);
  r.std = std::sqrt(r.std / splits);
  return r;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat to_matrix(const std::vector<std::vector<double>>& rows, std::size_t dim) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw ArgumentError("feature vectors differ in dimension");
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

// Symmetric square root with tiny negative eigenvalues clipped to zero.
Mat sym_sqrt(const Mat& a, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw NumericError(std::string("eigendecomposition failed for ") + what);
  Vec ev = es.eigenvalues();
  const double tol = -1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < tol) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s has eigenvalue %.3e below the clipping tolerance %.3e", what, ev(i), tol);
      throw NumericError(buf);
    }
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const std::vector<std::vector<double>>& real, const std::vector<std::vector<double>>& generated) {
  if (real.size() < 2 || generated.size() < 2) throw ArgumentError("FID needs at least two feature vectors per set");
  const std::size_t d = real.front().size();
  if (d == 0 || generated.front().size() != d)
    throw ArgumentError("FID feature dimensions differ: " + std::to_string(d) + " vs " +
                        std::to_string(generated.front().size()));
  const Mat a = to_matrix(real, d), b = to_matrix(generated, d);
  const Vec mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  const Mat ca = a.rowwise() - mu_a.transpose(), cb = b.rowwise() - mu_b.transpose();
  const Mat sa = ca.transpose() * ca / static_cast<double>(a.rows() - 1);
  const Mat sb = cb.transpose() * cb / static_cast<double>(b.rows() - 1);
  // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), the latter symmetric PSD.
  const Mat ra = sym_sqrt(sa, "real covariance");
  const Mat cross = sym_sqrt(ra * sb * ra, "covariance product");
  const double v = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross.trace();
  if (!std::isfinite(v)) throw NumericError("FID is not finite (mean gap " + std::to_string((mu_a - mu_b).norm()) + ")");
  return std::max(0.0, v);
}

double nway_topk_acc(const std::vector<int>& targets, const std::vector<std::vector<double>>& scores, int n, int k,
                     std::uint64_t seed) {
  if (targets.empty() || targets.size() != scores.size()) throw ArgumentError("N-way accuracy needs matched, non-empty inputs");
  const int classes = static_cast<int>(scores.front().size());
  if (n < 2) throw ArgumentError("N-way accuracy needs N >= 2");
  if (k < 1 || k >= n) throw ArgumentError("N-way accuracy needs 1 <= k < N");
  if (n > classes)
    throw ArgumentError("N = " + std::to_string(n) + " exceeds the classifier's " + std::to_string(classes) + " classes");
  int hits = 0;
  std::vector<int> others;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int target = targets[i];
    if (target < 0 || target >= classes || static_cast<int>(scores[i].size()) != classes)
      throw ArgumentError("N-way accuracy input " + std::to_string(i) + " is inconsistent");
    others.clear();
    for (int c = 0; c < classes; ++c)
      if (c != target) others.push_back(c);
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    // Partial Fisher-Yates: the first n - 1 entries become the distractors.
    for (int j = 0; j < n - 1; ++j) std::swap(others[j], others[rng.uniform_int(j, static_cast<int>(others.size()) - 1)]);
    int above = 0;
    for (int j = 0; j < n - 1; ++j) above += scores[i][others[j]] > scores[i][target] ? 1 : 0;
    hits += above < k ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double lpips_features(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size() || a.empty()) throw ArgumentError("LPIPS needs matching feature stacks");
  double total = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].shape() != b[l].shape()) throw ArgumentError("LPIPS feature shapes differ");
    const int c = a[l].dim(0);
    const std::size_t pos = a[l].numel() / static_cast<std::size_t>(c);
    const auto& va = a[l].values();
    const auto& vb = b[l].values();
    double layer = 0;
    for (std::size_t p = 0; p < pos; ++p) {
      double na = 0, nb = 0;
      for (int ch = 0; ch < c; ++ch) {
        na += va[ch * pos + p] * va[ch * pos + p];
        nb += vb[ch * pos + p] * vb[ch * pos + p];
      }
      na = std::sqrt(na) + 1e-10;
      nb = std::sqrt(nb) + 1e-10;
      for (int ch = 0; ch < c; ++ch) {
        const double d = va[ch * pos + p] / na - vb[ch * pos + p] / nb;
        layer += d * d;
      }
    }
    total += layer / static_cast<double>(pos);
  }
  return total / static_cast<double>(a.size());
}

double lpips(const data::Image& a, const data::Image& b, const Evaluator& net) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw ArgumentError("LPIPS inputs differ in resolution");
  NoGradGuard ng;
  return lpips_features(net.forward(a).layers, net.forward(b).layers);
}

void EvalManifest::validate() const {
  if (pairs.empty()) throw ArgumentError("evaluation manifest lists no image pairs");
  if (n_way < 2) throw ArgumentError("evaluation manifest needs n_way >= 2");
  if (top_k < 1 || top_k >= n_way) throw ArgumentError("evaluation manifest needs 1 <= top_k < n_way");
  if (is_splits < 1) throw ArgumentError("evaluation manifest needs is_splits >= 1");
}

json eval_manifest_to_json(const EvalManifest& m) {
  json pairs = json::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"ground_truth", p.ground_truth}, {"generated", p.generated}, {"class_label", p.class_label}});
  return {{"schema", "e2i.eval_manifest"},
          {"schema_version", 1},
          {"feature_extractor", m.feature_extractor},
          {"classifier", m.classifier},
          {"n_way", m.n_way},
          {"top_k", m.top_k},
          {"is_splits", m.is_splits},
          {"seed", m.seed},
          {"checkpoint_id", m.checkpoint_id},
          {"extra", m.extra},
          {"pairs", pairs}};
}

EvalManifest eval_manifest_from_json(const json& j, const fs::path& base_dir) {
  try {
    if (j.value("schema", "") != "e2i.eval_manifest") throw ArgumentError("not an evaluation manifest");
    if (j.value("schema_version", 0) != 1) throw ArgumentError("unsupported evaluation manifest version");
    EvalManifest m;
    m.feature_extractor = j.value("feature_extractor", "");
    m.classifier = j.value("classifier", "");
    m.n_way = j.value("n_way", 50);
    m.top_k = j.value("top_k", 1);
    m.is_splits = j.value("is_splits", 10);
    m.seed = j.value("seed", std::uint64_t{0});
    m.checkpoint_id = j.value("checkpoint_id", "");
    m.extra = j.value("extra", json::object());
    auto resolve = [&](const std::string& p) {
      fs::path q(p);
      return (q.is_relative() && !base_dir.empty() ? base_dir / q : q).string();
    };
    for (const auto& p : j.at("pairs"))
      m.pairs.push_back({resolve(p.at("ground_truth")), resolve(p.at("generated")), p.at("class_label")});
    return m;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed evaluation manifest: ") + e.what());
  }
}

EvalManifest read_eval_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read evaluation manifest: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError("evaluation manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return eval_manifest_from_json(j, path.parent_path());
}

void write_eval_manifest(const EvalManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write evaluation manifest: " + path.string());
  out << eval_manifest_to_json(m).dump(2) << "\n";
}

json report_to_json(const MetricsReport& r) {
  return {{"schema", "e2i.metrics_report"},
          {"schema_version", 1},
          {"is_mean", r.is_mean},
          {"is_std", r.is_std},
          {"fid", r.fid},
          {"acc", r.acc},
          {"lpips_mean", r.lpips_mean},
          {"sample_count", r.sample_count},
          {"config", r.config}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.is_mean = j.at("is_mean");
  r.is_std = j.at("is_std");
  r.fid = j.at("fid");
  r.acc = j.at("acc");
  r.lpips_mean = j.at("lpips_mean");
  r.sample_count = j.at("sample_count");
  r.config = j.value("config", json::object());
  return r;
}

std::string report_table_header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %8s %8s %10s %7s %7s %5s", "run", "IS", "IS_std", "FID", "ACC", "LPIPS", "n");
  return buf;
}

std::string report_row(const std::string& label, const MetricsReport& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-28s %8.3f %8.3f %10.3f %7.3f %7.4f %5zu", label.c_str(), r.is_mean, r.is_std, r.fid,
                r.acc, r.lpips_mean, r.sample_count);
  return buf;
}

MetricsReport evaluate_run(const EvalManifest& m, const Evaluator& net) {
  m.validate();
  if (!m.feature_extractor.empty() && m.feature_extractor != net.id)
    throw ArgumentError("manifest asks for feature extractor '" + m.feature_extractor + "', loaded '" + net.id + "'");
  if (!m.classifier.empty() && m.classifier != net.id)
    throw ArgumentError("manifest asks for classifier '" + m.classifier + "', loaded '" + net.id + "'");
  if (m.n_way > net.num_classes)
    throw ArgumentError("N = " + std::to_string(m.n_way) + " exceeds the classifier's " + std::to_string(net.num_classes) +
                        " classes");

  std::string missing;
  for (const auto& p : m.pairs)
    for (const auto* path : {&p.ground_truth, &p.generated})
      if (!fs::is_regular_file(*path)) missing += "\n  " + *path;
  if (!missing.empty()) throw IoError("evaluation images missing:" + missing);

  auto load = [&](const std::string& path) {
    data::Image img = data::read_image(path);
    if (img.height != net.image_size || img.width != net.image_size)
      img = data::resize_bilinear(img, net.image_size, net.image_size);
    return img;
  };

  std::vector<std::vector<double>> real_f, gen_f, gen_post;
  std::vector<int> targets;
  double lp = 0;
  {
    NoGradGuard ng;
    for (const auto& p : m.pairs) {
      const auto gt = net.forward(load(p.ground_truth));
      const auto gen = net.forward(load(p.generated));
      real_f.push_back(gt.pooled.values());
      gen_f.push_back(gen.pooled.values());
      const auto gt_post = ops::softmax_rows(gt.logits).values();
      targets.push_back(static_cast<int>(std::max_element(gt_post.begin(), gt_post.end()) - gt_post.begin()));
      gen_post.push_back(ops::softmax_rows(gen.logits).values());
      lp += lpips_features(gt.layers, gen.layers);
    }
  }
  MetricsReport r;
  r.sample_count = m.pairs.size();
  const int splits = std::min<int>(m.is_splits, static_cast<int>(m.pairs.size()));
  const auto is = inception_score(gen_post, splits);
  r.is_mean = is.mean;
  r.is_std = is.std;
  r.fid = fid(real_f, gen_f);
  r.acc = nway_topk_acc(targets, gen_post, m.n_way, m.top_k, m.seed);
  r.lpips_mean = lp / static_cast<double>(m.pairs.size());
  r.config = {{"n_way", m.n_way},
              {"top_k", m.top_k},
              {"is_splits", splits},
              {"seed", m.seed},
              {"feature_extractor", net.id},
              {"classifier", net.id},
              {"checkpoint_id", m.checkpoint_id},
              {"extra", m.extra}};
  return r;
}

}  // namespace e2i::metrics
