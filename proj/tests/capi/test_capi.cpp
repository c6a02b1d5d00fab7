// Exercises the shared library through its C header only.
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "e2i/e2i.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  e2i_string_free(s);
  return out;
}

void count_progress(const char*, long, long, void* user) { ++*static_cast<long*>(user); }

// One tiny end-to-end workspace shared by the run-level tests.
class Workspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    e2i_set_log_level(3);
    root_ = fs::temp_directory_path() / ("e2i_capi_" + std::to_string(std::random_device{}()));
    fs::create_directories(root_);
    const std::string data = (root_ / "data").string();
    ASSERT_EQ(e2i_synth(R"({"num_classes": 3, "length": 32, "samples_per_class": 4})", data.c_str()), E2I_OK)
        << e2i_last_error();
    ASSERT_EQ(e2i_config_new(&cfg_), E2I_OK);
    const std::vector<std::string> sets{
        "seed=21",
        "dataset.root=" + data,
        "backbone.path=" + (root_ / "backbone.e2i").string(),
        "backbone.vae_steps=2",
        "backbone.unet_steps=2",
        "decoder.path=" + (root_ / "decoder.e2i").string(),
        "decoder.epochs=1",
        "decoder.hidden=8",
        "evaluator.path=" + (root_ / "evaluator.e2i").string(),
        "evaluator.steps=2",
        "projection.channel_widths=[8,8,16,16]",
        "projection.strides=[2,2,2,2]",
        "training.max_steps=2",
        "training.batch_size=2",
        "training.learning_rate=0.001",
        "sampling.steps=2",
        "sampling.limit=2",
        "evaluation.n_way=2",
        "evaluation.is_splits=1",
        "paths.checkpoint_dir=" + (root_ / "ckpt").string(),
        "paths.output_dir=" + (root_ / "out").string(),
    };
    for (const auto& s : sets) ASSERT_EQ(e2i_config_set(cfg_, s.c_str()), E2I_OK) << s << ": " << e2i_last_error();
    ASSERT_EQ(e2i_train_backbone(cfg_, nullptr, nullptr), E2I_OK) << e2i_last_error();
    double acc = -1;
    ASSERT_EQ(e2i_train_decoder(cfg_, &acc, nullptr, nullptr), E2I_OK) << e2i_last_error();
    ASSERT_GE(acc, 0.0);
    ASSERT_LE(acc, 1.0);
    ASSERT_EQ(e2i_train_evaluator(cfg_, nullptr, nullptr), E2I_OK) << e2i_last_error();
    long ticks = 0;
    char* summary = nullptr;
    ASSERT_EQ(e2i_train(cfg_, 0, count_progress, &ticks, &summary), E2I_OK) << e2i_last_error();
    train_summary_ = take(summary);
    train_ticks_ = ticks;
  }
  static void TearDownTestSuite() {
    e2i_config_free(cfg_);
    cfg_ = nullptr;
    std::error_code ec;
    fs::remove_all(root_, ec);
  }

  static inline fs::path root_;
  static inline e2i_config* cfg_ = nullptr;
  static inline std::string train_summary_;
  static inline long train_ticks_ = 0;
};

}  // namespace

TEST(CApi, VersionAndErrorBuffer) {
  EXPECT_STRNE(e2i_version(), "");
  EXPECT_NE(e2i_last_error(), nullptr);
}

TEST(CApi, NullArgumentsReported) {
  EXPECT_EQ(e2i_config_new(nullptr), E2I_ERR_ARGUMENT);
  EXPECT_NE(std::string(e2i_last_error()).find("out"), std::string::npos);
  EXPECT_EQ(e2i_config_validate(nullptr), E2I_ERR_ARGUMENT);
  EXPECT_EQ(e2i_train(nullptr, 0, nullptr, nullptr, nullptr), E2I_ERR_ARGUMENT);
  EXPECT_EQ(e2i_generator_run(nullptr, nullptr, 1, 1, 0, nullptr, nullptr, nullptr), E2I_ERR_ARGUMENT);
  e2i_config_free(nullptr);
  e2i_report_free(nullptr);
  e2i_generator_free(nullptr);
  e2i_string_free(nullptr);
}

TEST(CApi, ConfigEditing) {
  e2i_config* c = nullptr;
  ASSERT_EQ(e2i_config_new(&c), E2I_OK);
  EXPECT_EQ(e2i_config_set(c, "training.batch_size=4"), E2I_OK);
  EXPECT_EQ(e2i_config_set(c, "training.batchsize=4"), E2I_ERR_CONFIG);
  EXPECT_NE(std::string(e2i_last_error()).find("training.batchsize"), std::string::npos);
  EXPECT_EQ(e2i_config_set(c, "training.batch_size=\"four\""), E2I_ERR_CONFIG);
  EXPECT_EQ(e2i_config_set(c, "garbage"), E2I_ERR_CONFIG);
  char* text = nullptr;
  ASSERT_EQ(e2i_config_to_json(c, &text), E2I_OK);
  const std::string j = take(text);
  EXPECT_NE(j.find("\"batch_size\": 4"), std::string::npos);
  EXPECT_EQ(e2i_config_validate(c), E2I_ERR_CONFIG);
  EXPECT_NE(std::string(e2i_last_error()).find("seed"), std::string::npos);
  EXPECT_EQ(e2i_config_set(c, "seed=8"), E2I_OK);
  EXPECT_EQ(e2i_config_validate(c), E2I_OK);
  EXPECT_EQ(e2i_config_set(c, "dataset.name=imagenet"), E2I_OK);
  EXPECT_EQ(e2i_config_validate(c), E2I_ERR_CONFIG);
  e2i_config_free(c);

  e2i_config* d = nullptr;
  EXPECT_EQ(e2i_config_from_json("{ nope", &d), E2I_ERR_CONFIG);
  EXPECT_EQ(d, nullptr);
  EXPECT_EQ(e2i_config_from_json(R"({"seed": 4, "training": {"epochs": 2}})", &d), E2I_OK);
  e2i_config_free(d);
  EXPECT_EQ(e2i_config_load("/nonexistent/run.json", &d), E2I_ERR_CONFIG);
}

TEST(CApi, CommandsWithoutSeedFail) {
  e2i_config* c = nullptr;
  ASSERT_EQ(e2i_config_new(&c), E2I_OK);
  EXPECT_EQ(e2i_train(c, 0, nullptr, nullptr, nullptr), E2I_ERR_CONFIG);
  e2i_config_free(c);
}

TEST(CApi, IngestErrors) {
  e2i_ingest_options o{"thoughtviz", "/nonexistent/raw", "/tmp/e2i_never", 0, 0, -1, 0};
  EXPECT_EQ(e2i_ingest(&o, nullptr), E2I_ERR_IO);
  o.format = "edf";
  EXPECT_EQ(e2i_ingest(&o, nullptr), E2I_ERR_ARGUMENT);
}

TEST(CApi, MetricPrimitives) {
  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> a(200 * 3);
  for (auto& v : a) v = n(rng);
  double out = -1;
  ASSERT_EQ(e2i_fid(a.data(), 200, a.data(), 200, 3, &out), E2I_OK);
  EXPECT_LE(out, 1e-6);
  EXPECT_EQ(e2i_fid(a.data(), 1, a.data(), 200, 3, &out), E2I_ERR_ARGUMENT);

  std::vector<double> uniform(40 * 4, 0.25);
  double mean = 0, sd = -1;
  ASSERT_EQ(e2i_inception_score(uniform.data(), 40, 4, 4, &mean, &sd), E2I_OK);
  EXPECT_NEAR(mean, 1.0, 1e-6);
  EXPECT_EQ(e2i_inception_score(uniform.data(), 3, 4, 10, &mean, &sd), E2I_ERR_ARGUMENT);

  const int targets[3] = {0, 2, 1};
  const double scores[9] = {1, 0, 0, 0, 0, 1, 0, 1, 0};
  ASSERT_EQ(e2i_nway_topk(targets, scores, 3, 3, 3, 1, 7, &out), E2I_OK);
  EXPECT_DOUBLE_EQ(out, 1.0);
  EXPECT_EQ(e2i_nway_topk(targets, scores, 3, 3, 4, 1, 7, &out), E2I_ERR_ARGUMENT);
}

TEST_F(Workspace, TrainReportsSummaryAndProgress) {
  EXPECT_NE(train_summary_.find("\"steps\""), std::string::npos);
  EXPECT_NE(train_summary_.find("\"checkpoint_id\""), std::string::npos);
  EXPECT_GE(train_ticks_, 2);
}

TEST_F(Workspace, GenerateThenEvaluate) {
  char* summary = nullptr;
  ASSERT_EQ(e2i_generate(cfg_, nullptr, nullptr, 0, nullptr, nullptr, &summary), E2I_OK) << e2i_last_error();
  const std::string s = take(summary);
  EXPECT_NE(s.find("eval_manifest.json"), std::string::npos);

  const std::string manifest = (root_ / "out" / "eval_manifest.json").string();
  const std::string evaluator = (root_ / "evaluator.e2i").string();
  e2i_report* r = nullptr;
  ASSERT_EQ(e2i_evaluate(manifest.c_str(), evaluator.c_str(), nullptr, &r), E2I_OK) << e2i_last_error();
  e2i_metrics m{};
  ASSERT_EQ(e2i_report_metrics(r, &m), E2I_OK);
  EXPECT_EQ(m.sample_count, 2u);
  EXPECT_TRUE(std::isfinite(m.fid));
  EXPECT_GE(m.acc, 0.0);
  EXPECT_LE(m.acc, 1.0);
  char* table = nullptr;
  ASSERT_EQ(e2i_report_table(r, &table), E2I_OK);
  EXPECT_NE(take(table).find("FID"), std::string::npos);
  char* json = nullptr;
  ASSERT_EQ(e2i_report_to_json(r, &json), E2I_OK);
  EXPECT_NE(take(json).find("lpips"), std::string::npos);
  e2i_report_free(r);
  EXPECT_TRUE(fs::exists(root_ / "out" / "metrics_report.json"));

  EXPECT_EQ(e2i_evaluate((root_ / "none.json").string().c_str(), evaluator.c_str(), nullptr, &r), E2I_ERR_CONFIG);
}

TEST_F(Workspace, GeneratorIsDeterministic) {
  e2i_generator* g = nullptr;
  ASSERT_EQ(e2i_generator_open(cfg_, nullptr, &g), E2I_OK) << e2i_last_error();
  const int size = e2i_generator_image_size(g), channels = e2i_generator_channels(g);
  EXPECT_EQ(size, 64);
  EXPECT_EQ(channels, 8);
  std::vector<float> eeg(static_cast<std::size_t>(channels) * 32);
  for (std::size_t i = 0; i < eeg.size(); ++i) eeg[i] = static_cast<float>(std::sin(0.3 * i) * 20 + 5);
  e2i_generation_params p{2, 0, 0, 0, 1.0, 99};
  std::vector<uint8_t> a(static_cast<std::size_t>(size) * size * 3), b(a.size());
  int la = -1, lb = -1;
  ASSERT_EQ(e2i_generator_run(g, eeg.data(), channels, 32, 1, &p, a.data(), &la), E2I_OK) << e2i_last_error();
  ASSERT_EQ(e2i_generator_run(g, eeg.data(), channels, 32, 1, &p, b.data(), &lb), E2I_OK);
  EXPECT_EQ(a, b);
  EXPECT_EQ(la, lb);
  EXPECT_GE(la, 0);
  EXPECT_LT(la, 3);

  p.seed = 100;
  ASSERT_EQ(e2i_generator_run(g, eeg.data(), channels, 32, 1, &p, b.data(), nullptr), E2I_OK);
  EXPECT_NE(a, b);

  EXPECT_EQ(e2i_generator_run(g, eeg.data(), channels - 1, 32, 1, &p, b.data(), nullptr), E2I_ERR_ARGUMENT);
  eeg[3] = NAN;
  EXPECT_EQ(e2i_generator_run(g, eeg.data(), channels, 32, 1, &p, b.data(), nullptr), E2I_ERR_ARGUMENT);
  e2i_generator_free(g);
}

TEST_F(Workspace, MissingCheckpointIsLoadOrConfigError) {
  e2i_generator* g = nullptr;
  const auto st = e2i_generator_open(cfg_, (root_ / "absent.e2i").string().c_str(), &g);
  EXPECT_TRUE(st == E2I_ERR_LOAD || st == E2I_ERR_CONFIG) << st;
  EXPECT_EQ(g, nullptr);
}
