#include "pipeline/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/log.hpp"
#include "data/loaders.hpp"
#include "decoder/decoder.hpp"

namespace e2i::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void report(const ProgressFn& p, const std::string& stage, long done, long total) {
  if (p) p(stage, done, total);
}

void require_path(const std::string& what, const std::string& path) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::string manifest_file(const RunConfig& cfg) { return (fs::path(cfg.dataset.root) / "manifest.json").string(); }

// Dataset checks that need only the manifest, so commands fail before any
// heavy work.
data::DatasetManifest check_dataset(const RunConfig& cfg) {
  if (cfg.dataset.root.empty()) throw ConfigError("dataset.root is not set");
  require_path("dataset manifest", manifest_file(cfg));
  data::DatasetManifest m = data::read_manifest(cfg.dataset.root);
  if (data::to_string(m.dataset_name) != cfg.dataset.name)
    throw ConfigError("dataset.name is '" + cfg.dataset.name + "' but " + cfg.dataset.root + " holds '" +
                      data::to_string(m.dataset_name) + "'");
  for (const auto* split : {&cfg.dataset.split, &cfg.dataset.eval_split})
    if (*split != "all" && !m.splits.count(*split))
      throw ConfigError("dataset has no split '" + *split + "'");
  for (int s : cfg.dataset.subjects)
    if (std::find(m.subjects.begin(), m.subjects.end(), s) == m.subjects.end())
      throw ConfigError("dataset.subjects lists unknown subject " + std::to_string(s));
  return m;
}

std::vector<data::PairedSample> load_split(const RunConfig& cfg, const std::string& split) {
  data::Dataset ds = data::load_dataset(cfg.dataset.root, split);
  std::vector<data::PairedSample> out;
  for (auto& s : ds.samples) {
    const auto& f = cfg.dataset.subjects;
    if (f.empty() || std::find(f.begin(), f.end(), s.eeg.subject_id) != f.end()) out.push_back(std::move(s));
  }
  if (out.empty()) throw ArgumentError("split '" + split + "' has no samples after the subject filter");
  return out;
}

std::vector<int> run_subjects(const RunConfig& cfg, const data::DatasetManifest& m) {
  return cfg.dataset.subjects.empty() ? m.subjects : cfg.dataset.subjects;
}

const data::Image& sized(const data::PairedSample& ps, int size, std::map<std::string, data::Image>& cache) {
  if (ps.image->height == size && ps.image->width == size) return *ps.image;
  auto it = cache.find(ps.image_path);
  if (it == cache.end()) it = cache.emplace(ps.image_path, data::resize_bilinear(*ps.image, size, size)).first;
  return it->second;
}

// One labeled image per distinct stimulus file, in file order.
std::vector<std::pair<data::Image, int>> unique_images(const std::vector<data::PairedSample>& samples, int size) {
  std::map<std::string, std::pair<data::Image, int>> by_path;
  for (const auto& s : samples)
    if (!by_path.count(s.image_path))
      by_path.emplace(s.image_path, std::make_pair(data::resize_bilinear(*s.image, size, size), s.eeg.class_label));
  std::vector<std::pair<data::Image, int>> out;
  for (auto& [_, v] : by_path) out.push_back(std::move(v));
  return out;
}

int backbone_image_size(const data::DatasetManifest& m) { return m.image_size > 0 ? m.image_size : 64; }

diffusion::Backbone open_backbone(const RunConfig& cfg) {
  const std::string path = resolve_weights_path(cfg.backbone.path);
  return diffusion::load_backbone(diffusion::parse_backbone_kind(cfg.backbone.kind), path);
}

std::string run_checkpoint_path(const RunConfig& cfg) {
  return (fs::path(cfg.paths.checkpoint_dir) / kRunCheckpointFile).string();
}

json projection_to_json(const projection::ProjectionConfig& p) {
  return {{"in_channels", p.in_channels}, {"min_length", p.min_length}, {"channel_widths", p.channel_widths},
          {"strides", p.strides}, {"kernel_size", p.kernel_size}};
}

projection::ProjectionConfig projection_from_json(const json& j) {
  projection::ProjectionConfig p;
  p.in_channels = j.at("in_channels").get<int>();
  p.min_length = j.at("min_length").get<int>();
  p.channel_widths = j.at("channel_widths").get<std::vector<int>>();
  p.strides = j.at("strides").get<std::vector<int>>();
  p.kernel_size = j.at("kernel_size").get<int>();
  return p;
}

std::string state_id(diffusion::ControlState& state, long step) {
  std::string bytes;
  for (auto& [name, t] : nn::collect(state)) {
    bytes += name;
    const auto& v = t.values();
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  bytes += std::to_string(step);
  return hex64(fnv1a(bytes));
}

struct Counters {
  long samples = 0;
  long dropped = 0;
};

std::string save_run(const std::string& path, diffusion::ControlState& state, diffusion::Trainer& trainer,
                     const diffusion::Backbone& bb, const json& meta_in, const Counters& counters) {
  Checkpoint ck;
  ck.kind = kRunCheckpointKind;
  ck.put_params(nn::collect(state));
  for (const auto& [name, mom] : trainer.optimizer().moments()) {
    ck.put("adam.m." + name, {static_cast<int>(mom.m.size())}, mom.m);
    ck.put("adam.v." + name, {static_cast<int>(mom.v.size())}, mom.v);
  }
  const std::string id = state_id(state, trainer.steps_taken());
  ck.meta = meta_in;
  ck.meta["step"] = trainer.steps_taken();
  ck.meta["adam_steps"] = trainer.optimizer().steps_taken();
  ck.meta["samples_seen"] = counters.samples;
  ck.meta["captions_dropped"] = counters.dropped;
  ck.meta["backbone_fingerprint"] = bb.fingerprint();
  ck.meta["checkpoint_id"] = id;
  fs::create_directories(fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path());
  save_checkpoint(ck, path);
  return id;
}

// Keeps log lines with step <= last_step so a resumed run appends after them.
void truncate_log(const fs::path& log, long last_step) {
  if (!fs::exists(log)) return;
  std::ifstream in(log);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (json::parse(line).at("step").get<long>() <= last_step) keep.push_back(line);
    } catch (const json::exception&) {
      break;  // torn final line from an interrupted write
    }
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, long epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x65706f6368ULL, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

int parse_int_term(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int n = std::stoi(v, &pos);
    if (pos == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw ArgumentError("selector term " + key + "=" + v + " needs an integer");
}

std::string fmt(double v, int prec) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(prec);
  o << v;
  return o.str();
}

}  // namespace

Selector Selector::parse(const std::string& text) {
  Selector s;
  if (text.empty() || text == "all") return s;
  std::stringstream ss(text);
  std::string term;
  while (std::getline(ss, term, ',')) {
    const auto eq = term.find('=');
    if (eq == std::string::npos) throw ArgumentError("selector term '" + term + "' is not key=value");
    std::string key = term.substr(0, eq), value = term.substr(eq + 1);
    if (key != "subject" && key != "class" && key != "id")
      throw ArgumentError("selector key '" + key + "' is not one of subject, class, id");
    if (key != "id") parse_int_term(key, value);
    s.terms.emplace_back(std::move(key), std::move(value));
  }
  return s;
}

bool Selector::matches(const data::EEGRecording& e) const {
  for (const auto& [k, v] : terms) {
    if (k == "subject" && e.subject_id != parse_int_term(k, v)) return false;
    if (k == "class" && e.class_label != parse_int_term(k, v)) return false;
    if (k == "id" && e.id != v) return false;
  }
  return true;
}

void cmd_synth(const data::SynthOptions& opt, const std::string& out_dir) {
  if (out_dir.empty()) throw ArgumentError("synth needs an output directory");
  data::Dataset ds = data::synth_dataset(opt);
  data::write_dataset(out_dir, ds.manifest, ds.samples);
}

data::DatasetManifest cmd_ingest(const IngestArgs& a) {
  if (a.out_dir.empty()) throw ArgumentError("ingest needs an output directory");
  if (a.image_size < 8) throw ArgumentError("ingest image size must be at least 8");
  data::Dataset merged;
  if (a.format == "eegcvpr40") {
    data::Eegcvpr40Options o;
    o.image_size = a.image_size;
    bool first = true;
    for (const char* split : {"train", "val", "test"}) {
      data::Dataset part = data::load_eegcvpr40(a.raw_root, split, o);
      if (first) {
        merged.manifest = part.manifest;
        merged.manifest.splits.clear();
        first = false;
      }
      merged.manifest.splits[split] = part.manifest.splits[split];
      for (auto& s : part.samples) merged.samples.push_back(std::move(s));
    }
  } else if (a.format == "thoughtviz") {
    data::ThoughtvizOptions o;
    o.image_size = a.image_size;
    o.window_length = a.window_length;
    o.overlap_fraction = a.overlap_fraction;
    o.test_every = a.test_every;
    merged = data::load_thoughtviz(a.raw_root, o);
  } else {
    throw ArgumentError("unknown archive format '" + a.format + "' (expected eegcvpr40 or thoughtviz)");
  }
  data::write_dataset(a.out_dir, merged.manifest, merged.samples);
  return data::read_manifest(a.out_dir);
}

void cmd_train_backbone(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto m = check_dataset(cfg);
  if (cfg.backbone.kind != "toy") throw ConfigError("only the toy backbone can be trained here");
  if (cfg.backbone.path.empty()) throw ConfigError("backbone.path is not set");
  const int size = backbone_image_size(m);
  report(progress, "load", 0, 1);
  const auto samples = load_split(cfg, "all");
  std::vector<diffusion::LabeledImage> images;
  for (auto& [img, label] : unique_images(samples, size)) images.push_back({img, label});
  const std::uint64_t seed = cfg.require_seed();
  auto bb = diffusion::make_toy_backbone(m.class_names, size, derive_seed(seed, {0x6262ULL}));
  diffusion::BackboneTrainOptions o;
  o.vae.steps = cfg.backbone.vae_steps;
  o.vae.seed = derive_seed(seed, {0x766165ULL});
  o.unet_steps = cfg.backbone.unet_steps;
  o.learning_rate = cfg.backbone.learning_rate;
  o.seed = derive_seed(seed, {0x756e6574ULL});
  report(progress, "train-backbone", 0, 1);
  diffusion::train_toy_backbone(bb, images, o);
  diffusion::save_backbone(bb, cfg.backbone.path);
  report(progress, "train-backbone", 1, 1);
}

double cmd_train_decoder(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto m = check_dataset(cfg);
  if (cfg.decoder.path.empty()) throw ConfigError("decoder.path is not set");
  auto to_labeled = [](const std::vector<data::PairedSample>& v) {
    std::vector<decoder::LabeledEEG> out;
    for (const auto& s : v) out.push_back({s.eeg.to_tensor(), s.eeg.class_label});
    return out;
  };
  const auto train = to_labeled(load_split(cfg, cfg.dataset.split));
  const auto held = to_labeled(load_split(cfg, cfg.dataset.eval_split));
  decoder::DecoderTrainOptions o;
  o.epochs = cfg.decoder.epochs;
  o.learning_rate = cfg.decoder.learning_rate;
  o.hidden = cfg.decoder.hidden;
  o.seed = derive_seed(cfg.require_seed(), {0x646563ULL});
  report(progress, "train-decoder", 0, 1);
  auto w = decoder::train_decoder(train, m.num_classes, o);
  decoder::save_decoder(w, cfg.decoder.path);
  report(progress, "train-decoder", 1, 1);
  return decoder::decoder_accuracy(held, w);
}

void cmd_train_evaluator(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto m = check_dataset(cfg);
  if (cfg.evaluator.path.empty()) throw ConfigError("evaluator.path is not set");
  const auto samples = load_split(cfg, "all");
  const auto images = unique_images(samples, backbone_image_size(m));
  std::vector<metrics::LabeledImageRef> refs;
  for (const auto& [img, label] : images) refs.push_back({&img, label});
  metrics::EvaluatorTrainOptions o;
  o.steps = cfg.evaluator.steps;
  o.seed = derive_seed(cfg.require_seed(), {0x6576616cULL});
  report(progress, "train-evaluator", 0, 1);
  auto net = metrics::train_evaluator(refs, m.num_classes, o);
  metrics::save_evaluator(net, cfg.evaluator.path);
  report(progress, "train-evaluator", 1, 1);
}

RunCheckpoint load_run_checkpoint(const std::string& path, const diffusion::Backbone& bb) {
  if (!fs::exists(path)) throw LoadError("run checkpoint not found: " + path);
  Checkpoint ck = load_checkpoint(path, kRunCheckpointKind);
  const std::string want = ck.meta.value("backbone_fingerprint", "");
  if (want != bb.fingerprint())
    throw LoadError("checkpoint " + path + " was trained against backbone " + want + ", loaded backbone is " +
                    bb.fingerprint());
  RunCheckpoint r{diffusion::make_control_state(bb, projection_from_json(ck.meta.at("projection")),
                                                ck.meta.at("subjects").get<std::vector<int>>(), 0),
                  ck.meta.at("step").get<long>(), ck.meta.value("checkpoint_id", ""), ck.meta};
  auto params = nn::collect(r.state);
  ck.load_params(params);
  return r;
}

TrainSummary cmd_train(const RunConfig& cfg, const ProgressFn& progress, long stop_after) {
  cfg.validate();
  const auto m = check_dataset(cfg);
  require_path("backbone.path", resolve_weights_path(cfg.backbone.path));
  require_path("decoder.path", resolve_weights_path(cfg.decoder.path));
  const std::uint64_t seed = cfg.require_seed();

  const auto bb = open_backbone(cfg);
  const auto dec = decoder::load_decoder(resolve_weights_path(cfg.decoder.path));
  if (dec.channels != m.channels) throw ConfigError("decoder expects " + std::to_string(dec.channels) + " channels");
  const auto proj = cfg.projection_config(m.channels, m.window_length);
  const auto subjects = run_subjects(cfg, m);

  report(progress, "load", 0, 1);
  const auto samples = load_split(cfg, cfg.dataset.split);
  std::vector<diffusion::TrainExample> examples;
  std::map<std::string, data::Image> resized;
  for (const auto& s : samples) {
    data::PairedSample ps = s;
    ps.image = std::make_shared<const data::Image>(sized(s, bb.vae.image_size, resized));
    const std::string caption = decoder::make_caption(decoder::decode_label(s.eeg.to_tensor(), dec), m.class_names);
    examples.push_back(diffusion::make_train_example(bb, ps, caption));
  }

  auto state = diffusion::make_control_state(bb, proj, subjects, derive_seed(seed, {0x696e6974ULL}));
  diffusion::Trainer trainer(bb, state, AdamConfig{cfg.training.learning_rate}, cfg.training.drop_enabled,
                             derive_seed(seed, {0x7374657073ULL}));

  const fs::path ck_path = run_checkpoint_path(cfg);
  const fs::path log_path = fs::path(cfg.paths.checkpoint_dir) / kLossLogFile;
  fs::create_directories(cfg.paths.checkpoint_dir);
  Counters counters;
  TrainSummary sum;
  if (cfg.training.resume && fs::exists(ck_path)) {
    Checkpoint ck = load_checkpoint(ck_path.string(), kRunCheckpointKind);
    if (ck.meta.value("backbone_fingerprint", "") != bb.fingerprint())
      throw LoadError("checkpoint " + ck_path.string() + " belongs to another backbone");
    if (ck.meta.value("seed", std::uint64_t{0}) != seed || ck.meta.value("drop_enabled", false) != cfg.training.drop_enabled ||
        projection_from_json(ck.meta.at("projection")) != proj)
      throw ConfigError("existing checkpoint " + ck_path.string() + " was written by a different configuration");
    auto params = nn::collect(state);
    ck.load_params(params);
    std::map<std::string, Adam::Moments> moments;
    for (const auto& [name, _] : trainer.optimizer().params()) {
      if (!ck.has("adam.m." + name)) continue;
      moments[name] = {ck.get("adam.m." + name).values, ck.get("adam.v." + name).values};
    }
    trainer.optimizer().restore(ck.meta.at("adam_steps").get<long>(), std::move(moments));
    trainer.set_step(ck.meta.at("step").get<long>());
    counters.samples = ck.meta.value("samples_seen", 0L);
    counters.dropped = ck.meta.value("captions_dropped", 0L);
    sum.resumed_from = trainer.steps_taken();
    truncate_log(log_path, trainer.steps_taken());
    log::info("resuming from step " + std::to_string(sum.resumed_from));
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  const long per_epoch = static_cast<long>((examples.size() + cfg.training.batch_size - 1) / cfg.training.batch_size);
  long total = per_epoch * cfg.training.epochs;
  if (cfg.training.max_steps > 0) total = std::min(total, cfg.training.max_steps);

  json meta = {{"seed", seed},
               {"drop_enabled", cfg.training.drop_enabled},
               {"projection", projection_to_json(proj)},
               {"subjects", subjects},
               {"dataset", cfg.dataset.name},
               {"class_names", m.class_names},
               {"learning_rate", cfg.training.learning_rate},
               {"batch_size", cfg.training.batch_size},
               {"total_steps", total}};

  std::ofstream log(log_path, std::ios::app);
  std::vector<std::size_t> order;
  long order_epoch = -1;
  long ran = 0;
  while (trainer.steps_taken() < total && (stop_after <= 0 || ran < stop_after)) {
    const long k = trainer.steps_taken();
    const long epoch = k / per_epoch, pos = k % per_epoch;
    if (epoch != order_epoch) {
      order = epoch_order(examples.size(), seed, epoch);
      order_epoch = epoch;
    }
    std::vector<const diffusion::TrainExample*> batch;
    const std::size_t lo = static_cast<std::size_t>(pos) * cfg.training.batch_size;
    const std::size_t hi = std::min(order.size(), lo + cfg.training.batch_size);
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(&examples[order[i]]);
    const auto st = trainer.step(batch);
    counters.samples += st.samples;
    counters.dropped += st.captions_dropped;
    ++ran;
    sum.last_loss = st.loss;
    json line = {{"step", trainer.steps_taken()},
                 {"loss", st.loss},
                 {"samples", st.samples},
                 {"empty_captions", st.captions_dropped},
                 {"empty_caption_fraction",
                  counters.samples ? static_cast<double>(counters.dropped) / static_cast<double>(counters.samples) : 0.0},
                 {"samples_seen", counters.samples}};
    log << line.dump() << "\n";
    log.flush();
    if (cfg.training.checkpoint_every > 0 && trainer.steps_taken() % cfg.training.checkpoint_every == 0)
      save_run(ck_path.string(), state, trainer, bb, meta, counters);
    report(progress, "train", trainer.steps_taken(), total);
  }
  sum.checkpoint_id = save_run(ck_path.string(), state, trainer, bb, meta, counters);
  sum.checkpoint_path = ck_path.string();
  sum.steps = trainer.steps_taken();
  sum.samples = counters.samples;
  sum.captions_dropped = counters.dropped;
  return sum;
}

GenerateSummary cmd_generate(const RunConfig& cfg, const GenerateOptions& opt, const ProgressFn& progress) {
  cfg.validate();
  const auto m = check_dataset(cfg);
  const Selector selector = Selector::parse(cfg.sampling.selector);
  const std::string ck_path = opt.checkpoint.empty() ? run_checkpoint_path(cfg) : opt.checkpoint;
  require_path("backbone.path", resolve_weights_path(cfg.backbone.path));
  require_path("decoder.path", resolve_weights_path(cfg.decoder.path));
  require_path("checkpoint", ck_path);
  const std::uint64_t seed = cfg.require_seed();

  const auto bb = open_backbone(cfg);
  auto run = load_run_checkpoint(ck_path, bb);
  const auto dec = decoder::load_decoder(resolve_weights_path(cfg.decoder.path));

  std::vector<data::PairedSample> picked;
  for (auto& s : load_split(cfg, cfg.dataset.eval_split))
    if (selector.matches(s.eeg)) picked.push_back(std::move(s));
  if (cfg.sampling.limit > 0 && static_cast<int>(picked.size()) > cfg.sampling.limit) picked.resize(cfg.sampling.limit);
  if (picked.empty()) throw ArgumentError("selector '" + cfg.sampling.selector + "' matches no evaluation samples");

  const fs::path out = opt.output_dir.empty() ? fs::path(cfg.paths.output_dir) : fs::path(opt.output_dir);
  fs::create_directories(out / "images");
  metrics::EvalManifest em;
  em.n_way = cfg.evaluation.n_way;
  em.top_k = cfg.evaluation.top_k;
  em.is_splits = cfg.evaluation.is_splits;
  em.seed = seed;
  em.checkpoint_id = run.checkpoint_id;
  em.extra = {{"guess_mode", cfg.sampling.guess_mode},
              {"zero_eeg", opt.zero_eeg},
              {"drop_enabled", run.meta.value("drop_enabled", false)},
              {"steps", cfg.sampling.steps},
              {"guidance_scale", cfg.sampling.guidance_scale},
              {"stochastic", cfg.sampling.stochastic},
              {"selector", cfg.sampling.selector},
              {"dataset", cfg.dataset.name},
              {"split", cfg.dataset.eval_split}};

  long done = 0;
  for (const auto& s : picked) {
    diffusion::GenerationRequest req;
    req.eeg = s.eeg.to_tensor();
    req.subject = s.eeg.subject_id;
    const int decoded = decoder::decode_label(req.eeg, dec);
    req.caption = decoder::make_caption(decoded, m.class_names);
    req.steps = cfg.sampling.steps;
    req.guess_mode = cfg.sampling.guess_mode;
    req.control_scales = cfg.sampling.scales;
    req.guidance_scale = cfg.sampling.guidance_scale;
    req.stochastic = cfg.sampling.stochastic;
    req.zero_eeg = opt.zero_eeg;
    req.seed = derive_seed(seed, {fnv1a(s.eeg.id)});
    const auto res = diffusion::sample(bb, &run.state, req);

    const std::string stem = fs::path(data::sanitize(s.eeg.id)).string();
    const fs::path img_rel = fs::path("images") / (stem + ".png");
    data::write_png((out / img_rel).string(), res.image);
    json side = {{"schema", "e2i.generation"},
                 {"schema_version", 1},
                 {"id", s.eeg.id},
                 {"subject", s.eeg.subject_id},
                 {"class_label", s.eeg.class_label},
                 {"decoded_label", decoded},
                 {"caption", req.caption},
                 {"seed", req.seed},
                 {"run_seed", seed},
                 {"steps", req.steps},
                 {"guess_mode", req.guess_mode},
                 {"control_scales", res.scales},
                 {"guidance_scale", req.guidance_scale},
                 {"stochastic", req.stochastic},
                 {"zero_eeg", req.zero_eeg},
                 {"checkpoint_id", run.checkpoint_id},
                 {"backbone_fingerprint", bb.fingerprint()},
                 {"image", img_rel.generic_string()}};
    std::ofstream(out / "images" / (stem + ".json")) << side.dump(2) << "\n";
    em.pairs.push_back({fs::absolute(s.image_path).lexically_normal().string(), img_rel.generic_string(),
                        s.eeg.class_label});
    report(progress, "generate", ++done, static_cast<long>(picked.size()));
  }
  const fs::path mp = out / "eval_manifest.json";
  metrics::write_eval_manifest(em, mp);
  return {static_cast<int>(picked.size()), mp.string(), run.checkpoint_id};
}

metrics::MetricsReport cmd_evaluate(const std::string& manifest_path, const std::string& evaluator_path,
                                    const std::string& report_path) {
  if (!fs::exists(manifest_path)) throw ConfigError("evaluation manifest not found: " + manifest_path);
  const std::string ev = resolve_weights_path(evaluator_path);
  require_path("evaluator.path", ev);
  const auto m = metrics::read_eval_manifest(manifest_path);
  m.validate();
  const auto net = metrics::load_evaluator(ev);
  const auto r = metrics::evaluate_run(m, net);
  fs::path out = report_path.empty() ? fs::path(manifest_path).parent_path() / "metrics_report.json" : fs::path(report_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream(out) << metrics::report_to_json(r).dump(2) << "\n";
  std::ofstream(fs::path(out).replace_extension(".txt")) << metrics::report_table_header() << "\n"
                                                         << metrics::report_row("run", r) << "\n";
  return r;
}

json cmd_ablate(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  check_dataset(cfg);
  const std::string ck_drop = resolve_weights_path(cfg.ablation.checkpoint_drop);
  const std::string ck_nodrop = resolve_weights_path(cfg.ablation.checkpoint_nodrop);
  require_path("ablation.checkpoint_drop", ck_drop);
  require_path("ablation.checkpoint_nodrop", ck_nodrop);
  require_path("evaluator.path", resolve_weights_path(cfg.evaluator.path));
  require_path("backbone.path", resolve_weights_path(cfg.backbone.path));
  require_path("decoder.path", resolve_weights_path(cfg.decoder.path));
  Selector::parse(cfg.sampling.selector);

  const fs::path root = fs::path(cfg.paths.output_dir) / "ablation";
  struct Row {
    std::string name;
    bool drop, guess, zero;
  };
  const bool g = cfg.sampling.guess_mode;
  std::vector<Row> rows = {{"nodrop_noguess", false, false, false},
                           {"nodrop_guess", false, true, false},
                           {"drop_noguess", true, false, false},
                           {"drop_guess", true, true, false},
                           {std::string(g ? "drop_guess" : "drop_noguess") + "_zero_eeg", true, g, true}};
  std::map<std::string, json> reports;
  long done = 0;
  for (const auto& row : rows) {
    RunConfig c = cfg;
    c.sampling.guess_mode = row.guess;
    GenerateOptions o;
    o.checkpoint = row.drop ? ck_drop : ck_nodrop;
    o.output_dir = (root / row.name).string();
    o.zero_eeg = row.zero;
    const auto gen = cmd_generate(c, o);
    const auto r = cmd_evaluate(gen.manifest_path, cfg.evaluator.path, (root / row.name / "metrics_report.json").string());
    reports[row.name] = metrics::report_to_json(r);
    report(progress, "ablate", ++done, static_cast<long>(rows.size()));
  }
  const std::string eeg_row = g ? "drop_guess" : "drop_noguess";
  json out = {{"schema", "e2i.ablation_report"}, {"schema_version", 1}, {"guess_mode", g}};
  out["eeg_conditioning"] = json::array({{{"label", "EEG + caption"}, {"zero_eeg", false}, {"report", reports[eeg_row]}},
                                         {{"label", "caption only"}, {"zero_eeg", true},
                                          {"report", reports[eeg_row + "_zero_eeg"]}}});
  out["drop_guess_grid"] = json::array();
  for (int i = 0; i < 4; ++i)
    out["drop_guess_grid"].push_back({{"drop", rows[i].drop}, {"guess", rows[i].guess}, {"report", reports[rows[i].name]}});
  fs::create_directories(cfg.paths.output_dir);
  std::ofstream(fs::path(cfg.paths.output_dir) / "ablation_report.json") << out.dump(2) << "\n";
  std::ofstream(fs::path(cfg.paths.output_dir) / "ablation_report.txt") << ablation_table(out);
  return out;
}

std::string ablation_table(const json& r) {
  std::ostringstream o;
  o << "EEG conditioning\n" << "condition              LPIPS\n";
  for (const auto& row : r.at("eeg_conditioning")) {
    std::string label = row.at("label").get<std::string>();
    label.resize(22, ' ');
    o << label << " " << fmt(row.at("report").at("lpips_mean").get<double>(), 4) << "\n";
  }
  o << "\ndrop x guess\n" << metrics::report_table_header() << "\n";
  for (const auto& row : r.at("drop_guess_grid")) {
    const std::string label = std::string("drop=") + (row.at("drop").get<bool>() ? "yes" : "no") +
                              " guess=" + (row.at("guess").get<bool>() ? "yes" : "no");
    o << metrics::report_row(label, metrics::report_from_json(row.at("report"))) << "\n";
  }
  return o.str();
}

}  // namespace e2i::pipeline
