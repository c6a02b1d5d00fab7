#include "pipeline/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/error.hpp"
#include "data/manifest.hpp"

namespace e2i::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("config must set 'seed'");
  return *seed;
}

void RunConfig::validate() const {
  require_seed();
  try {
    data::parse_dataset_name(dataset.name);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("dataset.name: ") + e.what());
  }
  if (backbone.kind != "toy" && backbone.kind != "pretrained_ldm")
    throw ConfigError("backbone.kind must be 'toy' or 'pretrained_ldm', got '" + backbone.kind + "'");
  if (training.optimizer != "adam") throw ConfigError("training.optimizer: only 'adam' is supported");
  if (training.epochs < 1) throw ConfigError("training.epochs must be positive");
  if (training.batch_size < 1) throw ConfigError("training.batch_size must be positive");
  if (!(training.learning_rate > 0)) throw ConfigError("training.learning_rate must be positive");
  if (training.max_steps < 0 || training.checkpoint_every < 0) throw ConfigError("training step counts must be non-negative");
  if (sampling.steps < 1) throw ConfigError("sampling.steps must be at least 1");
  if (!(sampling.guidance_scale >= 0)) throw ConfigError("sampling.guidance_scale must be non-negative");
  for (double s : sampling.scales)
    if (!(s >= 0 && s <= 1)) throw ConfigError("sampling.scales entries must lie in [0, 1]");
  if (evaluation.n_way < 2 || evaluation.top_k < 1 || evaluation.top_k >= evaluation.n_way)
    throw ConfigError("evaluation needs n_way >= 2 and 1 <= top_k < n_way");
  if (evaluation.is_splits < 1) throw ConfigError("evaluation.is_splits must be positive");
  if (projection.channel_widths.empty() || projection.channel_widths.size() != projection.strides.size())
    throw ConfigError("projection.channel_widths and projection.strides must have equal, non-zero length");
}

projection::ProjectionConfig RunConfig::projection_config(int in_channels, int window_length) const {
  projection::ProjectionConfig p;
  p.in_channels = in_channels;
  p.channel_widths = projection.channel_widths;
  p.strides = projection.strides;
  p.kernel_size = projection.kernel_size;
  p.min_length = projection.min_length > 0 ? projection.min_length : window_length;
  return p;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema"] = "e2i.run_config";
  j["schema_version"] = 1;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["dataset"] = {{"name", c.dataset.name}, {"root", c.dataset.root}, {"split", c.dataset.split},
                  {"eval_split", c.dataset.eval_split}, {"subjects", c.dataset.subjects}};
  j["backbone"] = {{"kind", c.backbone.kind}, {"path", c.backbone.path}, {"vae_steps", c.backbone.vae_steps},
                   {"unet_steps", c.backbone.unet_steps}, {"learning_rate", c.backbone.learning_rate}};
  j["projection"] = {{"channel_widths", c.projection.channel_widths}, {"strides", c.projection.strides},
                     {"kernel_size", c.projection.kernel_size}, {"min_length", c.projection.min_length}};
  j["training"] = {{"epochs", c.training.epochs}, {"max_steps", c.training.max_steps},
                   {"learning_rate", c.training.learning_rate}, {"optimizer", c.training.optimizer},
                   {"batch_size", c.training.batch_size}, {"drop_enabled", c.training.drop_enabled},
                   {"checkpoint_every", c.training.checkpoint_every}, {"resume", c.training.resume}};
  j["sampling"] = {{"steps", c.sampling.steps}, {"guess_mode", c.sampling.guess_mode}, {"scales", c.sampling.scales},
                   {"guidance_scale", c.sampling.guidance_scale}, {"stochastic", c.sampling.stochastic},
                   {"selector", c.sampling.selector}, {"limit", c.sampling.limit}};
  j["evaluation"] = {{"n_way", c.evaluation.n_way}, {"top_k", c.evaluation.top_k}, {"is_splits", c.evaluation.is_splits}};
  j["decoder"] = {{"path", c.decoder.path}, {"epochs", c.decoder.epochs}, {"learning_rate", c.decoder.learning_rate},
                  {"hidden", c.decoder.hidden}};
  j["evaluator"] = {{"path", c.evaluator.path}, {"steps", c.evaluator.steps}};
  j["ablation"] = {{"checkpoint_drop", c.ablation.checkpoint_drop}, {"checkpoint_nodrop", c.ablation.checkpoint_nodrop}};
  j["paths"] = {{"checkpoint_dir", c.paths.checkpoint_dir}, {"output_dir", c.paths.output_dir}};
  return j;
}

namespace {

// Reads known keys into fields and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + qualified(k) + "'");
  }

 private:
  std::string qualified(const std::string& k) const { return section_.empty() ? k : section_ + "." + k; }
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

const json& section(const json& j, const char* name) {
  static const json empty = json::object();
  return j.contains(name) ? j.at(name) : empty;
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader top(j, "");
  std::string schema = "e2i.run_config";
  int version = 1;
  top.get("schema", schema);
  top.get("schema_version", version);
  if (schema != "e2i.run_config") throw ConfigError("not a run config (schema '" + schema + "')");
  if (version != 1) throw ConfigError("unsupported run config version " + std::to_string(version));
  if (j.contains("seed") && !j.at("seed").is_null()) {
    std::uint64_t s = 0;
    top.get("seed", s);
    c.seed = s;
  } else {
    json dummy;
    top.get("seed", dummy);
  }
  for (const char* k : {"dataset", "backbone", "projection", "training", "sampling", "evaluation", "decoder",
                        "evaluator", "ablation", "paths"}) {
    json dummy;
    top.get(k, dummy);
  }
  top.finish();

  Reader d(section(j, "dataset"), "dataset");
  d.get("name", c.dataset.name);
  d.get("root", c.dataset.root);
  d.get("split", c.dataset.split);
  d.get("eval_split", c.dataset.eval_split);
  d.get("subjects", c.dataset.subjects);
  d.finish();
  Reader b(section(j, "backbone"), "backbone");
  b.get("kind", c.backbone.kind);
  b.get("path", c.backbone.path);
  b.get("vae_steps", c.backbone.vae_steps);
  b.get("unet_steps", c.backbone.unet_steps);
  b.get("learning_rate", c.backbone.learning_rate);
  b.finish();
  Reader p(section(j, "projection"), "projection");
  p.get("channel_widths", c.projection.channel_widths);
  p.get("strides", c.projection.strides);
  p.get("kernel_size", c.projection.kernel_size);
  p.get("min_length", c.projection.min_length);
  p.finish();
  Reader t(section(j, "training"), "training");
  t.get("epochs", c.training.epochs);
  t.get("max_steps", c.training.max_steps);
  t.get("learning_rate", c.training.learning_rate);
  t.get("optimizer", c.training.optimizer);
  t.get("batch_size", c.training.batch_size);
  t.get("drop_enabled", c.training.drop_enabled);
  t.get("checkpoint_every", c.training.checkpoint_every);
  t.get("resume", c.training.resume);
  t.finish();
  Reader s(section(j, "sampling"), "sampling");
  s.get("steps", c.sampling.steps);
  s.get("guess_mode", c.sampling.guess_mode);
  s.get("scales", c.sampling.scales);
  s.get("guidance_scale", c.sampling.guidance_scale);
  s.get("stochastic", c.sampling.stochastic);
  s.get("selector", c.sampling.selector);
  s.get("limit", c.sampling.limit);
  s.finish();
  Reader e(section(j, "evaluation"), "evaluation");
  e.get("n_way", c.evaluation.n_way);
  e.get("top_k", c.evaluation.top_k);
  e.get("is_splits", c.evaluation.is_splits);
  e.finish();
  Reader dc(section(j, "decoder"), "decoder");
  dc.get("path", c.decoder.path);
  dc.get("epochs", c.decoder.epochs);
  dc.get("learning_rate", c.decoder.learning_rate);
  dc.get("hidden", c.decoder.hidden);
  dc.finish();
  Reader ev(section(j, "evaluator"), "evaluator");
  ev.get("path", c.evaluator.path);
  ev.get("steps", c.evaluator.steps);
  ev.finish();
  Reader a(section(j, "ablation"), "ablation");
  a.get("checkpoint_drop", c.ablation.checkpoint_drop);
  a.get("checkpoint_nodrop", c.ablation.checkpoint_nodrop);
  a.finish();
  Reader pa(section(j, "paths"), "paths");
  pa.get("checkpoint_dir", c.paths.checkpoint_dir);
  pa.get("output_dir", c.paths.output_dir);
  pa.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override key " + key + " descends into a non-object");
    start = dot + 1;
  }
}

std::string resolve_weights_path(const std::string& path) {
  if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("E2I_WEIGHTS_DIR")) {
    fs::path cand = fs::path(dir) / path;
    if (fs::exists(cand)) return cand.string();
  }
  return path;
}

}  // namespace e2i::pipeline
