#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>

#include "archives.hpp"
#include "core/error.hpp"
#include "decoder/decoder.hpp"
#include "fixtures.hpp"
#include "pipeline/commands.hpp"
#include "tiny.hpp"

using namespace e2i;
using namespace e2i::pipeline;
using e2i::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Every regular file under root, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

// Weights and config for a dataset already written under dataset_dir.
RunConfig workspace(const fs::path& root, const fs::path& dataset_dir) {
  const auto m = data::read_manifest(dataset_dir);
  auto bb = diffusion::make_toy_backbone(m.class_names, 64, 1, e2i::testing::tiny_unet());
  diffusion::save_backbone(bb, (root / "backbone.e2i").string());
  auto dec = decoder::DecoderWeights::make(m.channels, 8, m.num_classes, 2);
  decoder::save_decoder(dec, (root / "decoder.e2i").string());

  RunConfig c;
  c.seed = 5;
  c.dataset.name = to_string(m.dataset_name);
  c.dataset.root = dataset_dir.string();
  c.backbone.path = (root / "backbone.e2i").string();
  c.decoder.path = (root / "decoder.e2i").string();
  c.projection.channel_widths = {8, 8, 16, 16};
  c.projection.strides = {2, 2, 2, 2};
  c.training.batch_size = 2;
  c.training.max_steps = 4;
  c.training.learning_rate = 1e-3;
  c.training.drop_enabled = true;
  c.sampling.steps = 3;
  c.sampling.limit = 2;
  c.evaluation.n_way = 2;
  c.paths.checkpoint_dir = (root / "ckpt").string();
  c.paths.output_dir = (root / "out").string();
  return c;
}

fs::path synth_corpus(const fs::path& root) {
  data::SynthOptions o;
  o.length = 32;
  o.samples_per_class = 4;
  cmd_synth(o, (root / "data").string());
  return root / "data";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  c.seed = 12;
  c.sampling.scales = {0.1, 0.5, 1.0, 1.0, 1.0};
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.seed, 12u);
}

TEST(Config, UnknownKeysRejected) {
  auto j = config_to_json(RunConfig{});
  j["training"]["learnig_rate"] = 1e-4;
  try {
    config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("training.learnig_rate"), std::string::npos);
  }
  auto k = config_to_json(RunConfig{});
  k["extras"] = json::object();
  EXPECT_THROW(config_from_json(k), ConfigError);
}

TEST(Config, TypeErrorsRejected) {
  auto j = config_to_json(RunConfig{});
  j["training"]["batch_size"] = "sixteen";
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, SeedIsMandatory) {
  RunConfig c;
  EXPECT_THROW(c.require_seed(), ConfigError);
  c.seed = 0;
  EXPECT_EQ(c.require_seed(), 0u);
}

TEST(Config, ValidateCatchesBadValues) {
  RunConfig c;
  c.seed = 1;
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](auto mutate) {
    RunConfig d = c;
    mutate(d);
    EXPECT_THROW(d.validate(), ConfigError);
  };
  bad([](RunConfig& d) { d.dataset.name = "imagenet"; });
  bad([](RunConfig& d) { d.training.optimizer = "sgd"; });
  bad([](RunConfig& d) { d.training.batch_size = 0; });
  bad([](RunConfig& d) { d.sampling.scales = {1.5}; });
  bad([](RunConfig& d) { d.evaluation.top_k = 50; });
  bad([](RunConfig& d) { d.projection.strides = {2, 2}; });
}

TEST(Config, Overrides) {
  json j = config_to_json(RunConfig{});
  apply_override(j, "training.learning_rate=0.002");
  apply_override(j, "sampling.guess_mode=true");
  apply_override(j, "dataset.root=/data/x y");
  apply_override(j, "sampling.scales=[0.1,0.2,0.3,0.4,1]");
  apply_override(j, "seed=99");
  const auto c = config_from_json(j);
  EXPECT_DOUBLE_EQ(c.training.learning_rate, 0.002);
  EXPECT_TRUE(c.sampling.guess_mode);
  EXPECT_EQ(c.dataset.root, "/data/x y");
  EXPECT_EQ(c.sampling.scales.size(), 5u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(j, "training..lr=1"), ConfigError);
}

TEST(Config, LoadFromFile) {
  TempDir dir("cfg");
  RunConfig c;
  c.seed = 3;
  c.training.epochs = 7;
  std::ofstream(dir.path() / "run.json") << config_to_json(c).dump(2);
  EXPECT_EQ(load_config((dir.path() / "run.json").string()).training.epochs, 7);
  EXPECT_THROW(load_config((dir.path() / "none.json").string()), ConfigError);
  std::ofstream(dir.path() / "broken.json") << "{ not json";
  EXPECT_THROW(load_config((dir.path() / "broken.json").string()), ConfigError);
}

TEST(Config, WeightsDirFallback) {
  TempDir dir("weights");
  std::ofstream(dir.path() / "vae.e2i") << "x";
  ::setenv("E2I_WEIGHTS_DIR", dir.path().c_str(), 1);
  EXPECT_EQ(fs::path(resolve_weights_path("vae.e2i")), dir.path() / "vae.e2i");
  EXPECT_EQ(resolve_weights_path("absent.e2i"), "absent.e2i");
  ::unsetenv("E2I_WEIGHTS_DIR");
  EXPECT_EQ(resolve_weights_path("vae.e2i"), "vae.e2i");
}

TEST(Selector, ParseAndMatch) {
  data::EEGRecording e;
  e.id = "s4_t9";
  e.subject_id = 4;
  e.class_label = 7;
  EXPECT_TRUE(Selector::parse("all").matches(e));
  EXPECT_TRUE(Selector::parse("").matches(e));
  EXPECT_TRUE(Selector::parse("subject=4").matches(e));
  EXPECT_FALSE(Selector::parse("subject=5").matches(e));
  EXPECT_TRUE(Selector::parse("subject=4,class=7").matches(e));
  EXPECT_FALSE(Selector::parse("subject=4,class=6").matches(e));
  EXPECT_TRUE(Selector::parse("id=s4_t9").matches(e));
  for (const char* bad : {"subject", "subject=x", "color=red", "class="})
    EXPECT_THROW(Selector::parse(bad), ArgumentError) << bad;
}

TEST(Ingest, ThoughtvizLayoutIsIdempotent) {
  TempDir dir("ingest_tv");
  e2i::testing::make_fake_thoughtviz(dir.path() / "raw", 50, 64);
  IngestArgs a;
  a.format = "thoughtviz";
  a.raw_root = (dir.path() / "raw").string();
  a.out_dir = (dir.path() / "canon").string();
  a.image_size = 16;
  const auto m = cmd_ingest(a);
  EXPECT_EQ(m.num_classes, 10);
  EXPECT_EQ(m.channels, 14);
  EXPECT_EQ(m.window_length, 32);
  EXPECT_FALSE(m.splits.at("test").empty());
  const auto first = tree(a.out_dir);
  cmd_ingest(a);
  EXPECT_EQ(tree(a.out_dir), first);
  EXPECT_EQ(data::read_manifest(a.out_dir), m);
}

TEST(Ingest, UnknownFormatAndMissingRoot) {
  TempDir dir("ingest_bad");
  IngestArgs a;
  a.format = "edf";
  a.raw_root = dir.path().string();
  a.out_dir = (dir.path() / "o").string();
  EXPECT_THROW(cmd_ingest(a), ArgumentError);
  a.format = "thoughtviz";
  a.raw_root = (dir.path() / "nowhere").string();
  EXPECT_THROW(cmd_ingest(a), IoError);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  TempDir dir("resume");
  const auto data_dir = synth_corpus(dir.path());
  auto cfg = workspace(dir.path(), data_dir);

  cfg.paths.checkpoint_dir = (dir.path() / "straight").string();
  const auto straight = cmd_train(cfg);
  EXPECT_EQ(straight.steps, 4);
  EXPECT_EQ(straight.resumed_from, 0);

  cfg.paths.checkpoint_dir = (dir.path() / "split").string();
  const auto part = cmd_train(cfg, {}, 2);
  EXPECT_EQ(part.steps, 2);
  const auto rest = cmd_train(cfg);
  EXPECT_EQ(rest.resumed_from, 2);
  EXPECT_EQ(rest.steps, 4);
  EXPECT_EQ(rest.samples, straight.samples);
  EXPECT_EQ(rest.captions_dropped, straight.captions_dropped);
  EXPECT_EQ(rest.checkpoint_id, straight.checkpoint_id);
  EXPECT_EQ(slurp(dir.path() / "split" / kRunCheckpointFile), slurp(dir.path() / "straight" / kRunCheckpointFile));
  EXPECT_EQ(slurp(dir.path() / "split" / kLossLogFile), slurp(dir.path() / "straight" / kLossLogFile));

  // A different seed must not silently continue another run.
  cfg.seed = 6;
  EXPECT_THROW(cmd_train(cfg), ConfigError);
}

TEST(Train, LossLogHasOneLinePerStep) {
  TempDir dir("losslog");
  auto cfg = workspace(dir.path(), synth_corpus(dir.path()));
  cmd_train(cfg);
  std::ifstream in(fs::path(cfg.paths.checkpoint_dir) / kLossLogFile);
  std::string line;
  long step = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("step"), ++step);
    EXPECT_TRUE(j.contains("empty_caption_fraction"));
    EXPECT_TRUE(std::isfinite(j.at("loss").get<double>()));
  }
  EXPECT_EQ(step, 4);
}

TEST(Train, MissingInputsAreReported) {
  TempDir dir("missing");
  auto cfg = workspace(dir.path(), synth_corpus(dir.path()));
  auto no_seed = cfg;
  no_seed.seed.reset();
  EXPECT_THROW(cmd_train(no_seed), ConfigError);
  auto no_backbone = cfg;
  no_backbone.backbone.path = (dir.path() / "absent.e2i").string();
  EXPECT_THROW(cmd_train(no_backbone), ConfigError);
}

TEST(Generate, RerunIsByteIdenticalAndGuessFlagRecorded) {
  TempDir dir("generate");
  auto cfg = workspace(dir.path(), synth_corpus(dir.path()));
  cmd_train(cfg);
  GenerateOptions o;
  o.output_dir = (dir.path() / "g1").string();
  const auto s1 = cmd_generate(cfg, o);
  EXPECT_EQ(s1.count, 2);
  o.output_dir = (dir.path() / "g2").string();
  cmd_generate(cfg, o);
  EXPECT_EQ(tree(dir.path() / "g1"), tree(dir.path() / "g2"));

  cfg.sampling.guess_mode = true;
  o.output_dir = (dir.path() / "g3").string();
  cmd_generate(cfg, o);
  for (const auto& [name, body] : tree(dir.path() / "g3")) {
    if (name.rfind("images/", 0) != 0 || fs::path(name).extension() != ".json") continue;
    const auto side = json::parse(body);
    EXPECT_TRUE(side.at("guess_mode").get<bool>());
    const auto before = json::parse(slurp(dir.path() / "g1" / name));
    EXPECT_FALSE(before.at("guess_mode").get<bool>());
    EXPECT_EQ(side.at("checkpoint_id"), s1.checkpoint_id);
  }
  const auto em = metrics::read_eval_manifest(dir.path() / "g3" / "eval_manifest.json");
  EXPECT_TRUE(em.extra.at("guess_mode").get<bool>());
}

TEST(Generate, ForeignBackboneRejected) {
  TempDir dir("foreign");
  auto cfg = workspace(dir.path(), synth_corpus(dir.path()));
  cmd_train(cfg);
  auto wide = e2i::testing::tiny_unet();
  wide.base_width = 16;
  const auto m = data::read_manifest(cfg.dataset.root);
  diffusion::save_backbone(diffusion::make_toy_backbone(m.class_names, 64, 1, wide),
                           (dir.path() / "wide.e2i").string());
  cfg.backbone.path = (dir.path() / "wide.e2i").string();
  EXPECT_THROW(cmd_generate(cfg), LoadError);
}

TEST(Generate, SubjectSelectorOnEegcvpr40Layout) {
  TempDir dir("cvpr");
  e2i::testing::make_fake_eegcvpr40(dir.path() / "raw");
  IngestArgs a;
  a.format = "eegcvpr40";
  a.raw_root = (dir.path() / "raw").string();
  a.out_dir = (dir.path() / "canon").string();
  const auto m = cmd_ingest(a);
  EXPECT_EQ(m.channels, 128);
  auto cfg = workspace(dir.path(), a.out_dir);
  cfg.training.max_steps = 1;
  cfg.sampling.selector = "subject=4";
  cfg.sampling.limit = 0;
  cmd_train(cfg);
  const auto s = cmd_generate(cfg);
  EXPECT_EQ(s.count, 1);
  for (const auto& [name, body] : tree(cfg.paths.output_dir))
    if (fs::path(name).extension() == ".json" && name.rfind("images/", 0) == 0)
      EXPECT_EQ(json::parse(body).at("subject"), 4);

  cfg.sampling.selector = "subject=1";
  EXPECT_THROW(cmd_generate(cfg), ArgumentError);
}

TEST(Evaluate, ReportWrittenNextToManifest) {
  TempDir dir("evaluate");
  auto cfg = workspace(dir.path(), synth_corpus(dir.path()));
  cmd_train(cfg);
  const auto g = cmd_generate(cfg);
  const auto m = data::read_manifest(cfg.dataset.root);
  metrics::save_evaluator(metrics::Evaluator::make(64, m.num_classes, 3), (dir.path() / "eval.e2i").string());
  const auto r = cmd_evaluate(g.manifest_path, (dir.path() / "eval.e2i").string());
  EXPECT_EQ(r.sample_count, 2u);
  const auto out = fs::path(g.manifest_path).parent_path();
  EXPECT_TRUE(fs::exists(out / "metrics_report.json"));
  EXPECT_TRUE(fs::exists(out / "metrics_report.txt"));
  EXPECT_THROW(cmd_evaluate((dir.path() / "none.json").string(), (dir.path() / "eval.e2i").string()), ConfigError);
}
