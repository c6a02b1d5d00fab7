#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "data/synth.hpp"
#include "metrics/metrics.hpp"

using namespace e2i;
using namespace e2i::metrics;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<double>> gaussian_set(int n, int d, const std::vector<double>& shift, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
  for (auto& row : out) {
    row = rng.normals(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) row[j] += shift[j];
  }
  return out;
}

std::vector<data::Image> glyphs(int k) {
  std::vector<data::Image> out;
  for (int c = 0; c < k; ++c) out.push_back(data::class_glyph(c, k, 64));
  return out;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(InceptionScore, UniformPosteriorsScoreOne) {
  std::vector<std::vector<double>> p(200, std::vector<double>(10, 0.1));
  const auto s = inception_score(p, 10);
  EXPECT_NEAR(s.mean, 1.0, 1e-6);
  EXPECT_NEAR(s.std, 0.0, 1e-6);
}

TEST(InceptionScore, BalancedOneHotScoresClassCount) {
  const int m = 7;
  std::vector<std::vector<double>> p;
  for (int i = 0; i < 10 * m; ++i) {
    std::vector<double> row(m, 0.0);
    row[i % m] = 1.0;
    p.push_back(row);
  }
  EXPECT_NEAR(inception_score(p, 10).mean, m, 1e-3);
  EXPECT_NEAR(inception_score(p, 1).mean, m, 1e-3);
}

TEST(InceptionScore, TooFewSamplesRejected) {
  std::vector<std::vector<double>> p(5, std::vector<double>(3, 1.0 / 3));
  EXPECT_THROW(inception_score(p, 10), ArgumentError);
}

TEST(Fid, IdenticalSetsScoreZero) {
  const auto a = gaussian_set(500, 6, std::vector<double>(6, 0.0), 1);
  EXPECT_LE(fid(a, a), 1e-6);
}

TEST(Fid, OffsetGaussiansMatchSquaredShift) {
  const std::vector<double> v{1.0, -0.5, 1.5, 0.0};
  const double want = 1.0 + 0.25 + 2.25;
  const auto a = gaussian_set(10000, 4, std::vector<double>(4, 0.0), 2);
  const auto b = gaussian_set(10000, 4, v, 3);
  EXPECT_NEAR(fid(a, b), want, 0.05 * want);
}

TEST(Fid, Symmetric) {
  const auto a = gaussian_set(300, 5, std::vector<double>(5, 0.0), 4);
  const auto b = gaussian_set(300, 5, std::vector<double>(5, 0.7), 5);
  EXPECT_NEAR(fid(a, b), fid(b, a), 1e-8);
}

TEST(Fid, ShapeErrors) {
  const auto a = gaussian_set(10, 3, std::vector<double>(3, 0.0), 1);
  const auto b = gaussian_set(10, 4, std::vector<double>(4, 0.0), 1);
  EXPECT_THROW(fid(a, b), ArgumentError);
  EXPECT_THROW(fid({a[0]}, a), ArgumentError);
}

TEST(NwayTopk, RandomScoresHitChance) {
  const int trials = 10000, classes = 60;
  Rng rng(11);
  std::vector<int> targets;
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < trials; ++i) {
    targets.push_back(rng.uniform_int(0, classes - 1));
    scores.push_back(rng.normals(classes));
  }
  EXPECT_NEAR(nway_topk_acc(targets, scores, 50, 1, 5), 0.02, 0.005);
}

TEST(NwayTopk, MonotoneInK) {
  Rng rng(12);
  std::vector<int> targets;
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 2000; ++i) {
    targets.push_back(rng.uniform_int(0, 9));
    auto s = rng.normals(10);
    s[targets.back()] += 0.8;
    scores.push_back(s);
  }
  double prev = 0;
  for (int k = 1; k < 10; ++k) {
    const double acc = nway_topk_acc(targets, scores, 10, k, 1);
    EXPECT_GE(acc, prev);
    prev = acc;
  }
  EXPECT_DOUBLE_EQ(nway_topk_acc(targets, scores, 10, 1, 1), nway_topk_acc(targets, scores, 10, 1, 1));
}

TEST(NwayTopk, PerfectScoresAlwaysHit) {
  std::vector<int> targets{0, 1, 2, 3};
  std::vector<std::vector<double>> scores;
  for (int t : targets) {
    std::vector<double> s(4, 0.0);
    s[t] = 1.0;
    scores.push_back(s);
  }
  EXPECT_DOUBLE_EQ(nway_topk_acc(targets, scores, 4, 1, 0), 1.0);
}

TEST(NwayTopk, ArgumentErrors) {
  std::vector<int> targets{0, 1};
  std::vector<std::vector<double>> scores(2, std::vector<double>(4, 0.25));
  EXPECT_THROW(nway_topk_acc(targets, scores, 5, 1, 0), ArgumentError);
  EXPECT_THROW(nway_topk_acc(targets, scores, 4, 4, 0), ArgumentError);
  EXPECT_THROW(nway_topk_acc(targets, scores, 4, 0, 0), ArgumentError);
  EXPECT_THROW(nway_topk_acc({0}, scores, 4, 1, 0), ArgumentError);
}

TEST(Lpips, ZeroOnSelfAndSymmetric) {
  const auto net = Evaluator::make(64, 4, 1);
  const auto g = glyphs(4);
  EXPECT_DOUBLE_EQ(lpips(g[0], g[0], net), 0.0);
  const double ab = lpips(g[0], g[1], net), ba = lpips(g[1], g[0], net);
  EXPECT_GT(ab, 0.0);
  EXPECT_NEAR(ab, ba, 1e-7);
}

TEST(Lpips, ResolutionMismatchRejected) {
  const auto net = Evaluator::make(64, 4, 1);
  EXPECT_THROW(lpips(glyphs(2)[0], data::Image::blank(32, 32), net), ArgumentError);
}

TEST(Evaluator, LearnsGlyphClasses) {
  const int k = 6;
  const auto g = glyphs(k);
  std::vector<LabeledImageRef> refs;
  for (int c = 0; c < k; ++c) refs.push_back({&g[c], c});
  EvaluatorTrainOptions o;
  o.steps = 150;
  const auto net = train_evaluator(refs, k, o);
  Rng rng(77);
  int hits = 0, n = 0;
  for (int rep = 0; rep < 5; ++rep)
    for (int c = 0; c < k; ++c) {
      hits += net.classify(augment(g[c], rng)) == c;
      ++n;
    }
  EXPECT_GT(hits / static_cast<double>(n), 1.0 / k + 0.2);
}

TEST(Evaluator, SaveLoadRoundTrip) {
  const auto net = Evaluator::make(64, 3, 5);
  const auto path = fs::temp_directory_path() / "e2i_evaluator_roundtrip.e2i";
  save_evaluator(net, path.string());
  const auto back = load_evaluator(path.string());
  fs::remove(path);
  const auto img = glyphs(3)[1];
  EXPECT_EQ(net.posterior(img), back.posterior(img));
  EXPECT_EQ(back.id, net.id);
}

TEST(EvaluateRun, IdenticalImagesGiveIdealScores) {
  const auto dir = fresh_dir("e2i_eval_identical");
  const int k = 4;
  const auto net = Evaluator::make(64, k, 2);
  const auto g = glyphs(k);
  EvalManifest m;
  m.n_way = k;
  m.is_splits = 2;
  m.seed = 9;
  m.checkpoint_id = "abc";
  for (int i = 0; i < 8; ++i) {
    const auto p = (dir / ("img" + std::to_string(i) + ".png")).string();
    data::write_png(p, g[i % k]);
    m.pairs.push_back({p, p, i % k});
  }
  const auto r = evaluate_run(m, net);
  EXPECT_LE(r.fid, 1e-6);
  EXPECT_DOUBLE_EQ(r.lpips_mean, 0.0);
  EXPECT_DOUBLE_EQ(r.acc, 1.0);
  EXPECT_EQ(r.sample_count, 8u);
  EXPECT_EQ(r.config.at("n_way"), k);
  EXPECT_EQ(r.config.at("top_k"), 1);
  EXPECT_EQ(r.config.at("seed"), 9);
  EXPECT_EQ(r.config.at("checkpoint_id"), "abc");
  EXPECT_EQ(r.config.at("feature_extractor"), net.id);

  const auto again = report_from_json(report_to_json(r));
  EXPECT_EQ(report_to_json(again), report_to_json(r));
  fs::remove_all(dir);
}

TEST(EvaluateRun, MissingFilesListed) {
  const auto dir = fresh_dir("e2i_eval_missing");
  const auto net = Evaluator::make(64, 4, 2);
  const auto ok = (dir / "ok.png").string();
  data::write_png(ok, glyphs(1)[0]);
  EvalManifest m;
  m.n_way = 4;
  m.pairs.push_back({ok, (dir / "gone_a.png").string(), 0});
  m.pairs.push_back({(dir / "gone_b.png").string(), ok, 0});
  try {
    evaluate_run(m, net);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("gone_a.png"), std::string::npos);
    EXPECT_NE(msg.find("gone_b.png"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(EvaluateRun, ManifestChecks) {
  const auto net = Evaluator::make(64, 4, 2);
  EvalManifest m;
  m.n_way = 4;
  EXPECT_THROW(evaluate_run(m, net), ArgumentError);
  m.pairs.push_back({"a.png", "b.png", 0});
  m.n_way = 8;
  EXPECT_THROW(evaluate_run(m, net), ArgumentError);
  m.n_way = 4;
  m.feature_extractor = "inception-v3";
  EXPECT_THROW(evaluate_run(m, net), ArgumentError);
}

TEST(EvalManifestJson, RelativePathsResolveAgainstBase) {
  EvalManifest m;
  m.pairs.push_back({"/abs/gt.png", "images/gen.png", 2});
  m.n_way = 5;
  const auto back = eval_manifest_from_json(eval_manifest_to_json(m), "/runs/out");
  ASSERT_EQ(back.pairs.size(), 1u);
  EXPECT_EQ(back.pairs[0].ground_truth, "/abs/gt.png");
  EXPECT_EQ(fs::path(back.pairs[0].generated), fs::path("/runs/out/images/gen.png"));
  EXPECT_EQ(back.pairs[0].class_label, 2);
  EXPECT_EQ(back.n_way, 5);
}
