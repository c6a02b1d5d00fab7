#include "e2i/e2i.h"

#include <cmath>
#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "core/error.hpp"
#include "core/log.hpp"
#include "decoder/decoder.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/commands.hpp"

using nlohmann::json;
namespace pl = e2i::pipeline;

struct e2i_config {
  json doc;
};

struct e2i_report {
  e2i::metrics::MetricsReport report;
};

struct e2i_generator {
  pl::RunConfig cfg;
  e2i::diffusion::Backbone backbone;
  e2i::decoder::DecoderWeights decoder;
  pl::RunCheckpoint run;
  std::vector<std::string> class_names;
};

namespace {

thread_local std::string g_error;

e2i_status status_of(e2i::ErrorKind k) {
  switch (k) {
    case e2i::ErrorKind::Argument: return E2I_ERR_ARGUMENT;
    case e2i::ErrorKind::Io: return E2I_ERR_IO;
    case e2i::ErrorKind::Config: return E2I_ERR_CONFIG;
    case e2i::ErrorKind::Numeric: return E2I_ERR_NUMERIC;
    case e2i::ErrorKind::Load: return E2I_ERR_LOAD;
    case e2i::ErrorKind::Internal: return E2I_ERR_INTERNAL;
  }
  return E2I_ERR_INTERNAL;
}

template <class F>
e2i_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    return E2I_OK;
  } catch (const e2i::Error& e) {
    g_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_error = std::string("malformed JSON: ") + e.what();
    return E2I_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return E2I_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return E2I_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw e2i::ArgumentError(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

pl::RunConfig parse(const e2i_config* cfg) {
  need(cfg, "config");
  return pl::config_from_json(cfg->doc);
}

pl::ProgressFn wrap(e2i_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& stage, long done, long total) { fn(stage.c_str(), done, total, user); };
}

std::string opt_str(const char* s) { return s ? s : ""; }

}  // namespace

extern "C" {

const char* e2i_last_error(void) { return g_error.c_str(); }
const char* e2i_version(void) { return "1.0.0"; }

void e2i_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 4) level = 4;
  e2i::log::set_level(static_cast<e2i::log::Level>(level));
}

void e2i_string_free(char* s) { delete[] s; }

e2i_status e2i_config_new(e2i_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new e2i_config{pl::config_to_json(pl::RunConfig{})};
  });
}

e2i_status e2i_config_load(const char* path, e2i_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    pl::load_config(path);  // surface schema errors at load time
    std::ifstream in(path);
    *out = new e2i_config{json::parse(in)};
  });
}

e2i_status e2i_config_from_json(const char* text, e2i_config** out) {
  return guarded([&] {
    need(text, "json_text");
    need(out, "out");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw e2i::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    pl::config_from_json(j);
    *out = new e2i_config{std::move(j)};
  });
}

e2i_status e2i_config_set(e2i_config* cfg, const char* assignment) {
  return guarded([&] {
    need(cfg, "config");
    need(assignment, "assignment");
    json next = cfg->doc;
    pl::apply_override(next, assignment);
    pl::config_from_json(next);
    cfg->doc = std::move(next);
  });
}

e2i_status e2i_config_validate(const e2i_config* cfg) { return guarded([&] { parse(cfg).validate(); }); }

e2i_status e2i_config_to_json(const e2i_config* cfg, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = dup(pl::config_to_json(parse(cfg)).dump(2));
  });
}

void e2i_config_free(e2i_config* cfg) { delete cfg; }

e2i_status e2i_synth(const char* options_json, const char* out_dir) {
  return guarded([&] {
    need(out_dir, "out_dir");
    e2i::data::SynthOptions o;
    if (options_json && *options_json) {
      const json j = json::parse(options_json);
      for (const auto& [k, v] : j.items()) {
        if (k == "num_classes") o.num_classes = v;
        else if (k == "channels") o.channels = v;
        else if (k == "length") o.length = v;
        else if (k == "samples_per_class") o.samples_per_class = v;
        else if (k == "variants_per_class") o.variants_per_class = v;
        else if (k == "image_size") o.image_size = v;
        else if (k == "seed") o.seed = v;
        else if (k == "num_subjects") o.num_subjects = v;
        else if (k == "sample_rate_hz") o.sample_rate_hz = v;
        else if (k == "noise_std") o.noise_std = v;
        else if (k == "test_fraction") o.test_fraction = v;
        else throw e2i::ArgumentError("unknown synth option '" + k + "'");
      }
    }
    pl::cmd_synth(o, out_dir);
  });
}

e2i_status e2i_ingest(const e2i_ingest_options* opt, char** summary_json) {
  return guarded([&] {
    need(opt, "options");
    pl::IngestArgs a;
    a.format = opt_str(opt->format);
    a.raw_root = opt_str(opt->raw_root);
    a.out_dir = opt_str(opt->out_dir);
    if (opt->image_size > 0) a.image_size = opt->image_size;
    if (opt->window_length > 0) a.window_length = opt->window_length;
    if (opt->overlap >= 0) a.overlap_fraction = opt->overlap;
    if (opt->test_every > 0) a.test_every = opt->test_every;
    const auto m = pl::cmd_ingest(a);
    json s = {{"dataset", e2i::data::to_string(m.dataset_name)},
              {"num_classes", m.num_classes},
              {"channels", m.channels},
              {"window_length", m.window_length},
              {"samples", m.samples.size()},
              {"subjects", m.subjects}};
    for (const auto& [name, ids] : m.splits) s["splits"][name] = ids.size();
    put(summary_json, s.dump());
  });
}

e2i_status e2i_train_backbone(const e2i_config* cfg, e2i_progress_fn progress, void* user) {
  return guarded([&] { pl::cmd_train_backbone(parse(cfg), wrap(progress, user)); });
}

e2i_status e2i_train_decoder(const e2i_config* cfg, double* heldout_accuracy, e2i_progress_fn progress, void* user) {
  return guarded([&] {
    const double acc = pl::cmd_train_decoder(parse(cfg), wrap(progress, user));
    if (heldout_accuracy) *heldout_accuracy = acc;
  });
}

e2i_status e2i_train_evaluator(const e2i_config* cfg, e2i_progress_fn progress, void* user) {
  return guarded([&] { pl::cmd_train_evaluator(parse(cfg), wrap(progress, user)); });
}

e2i_status e2i_train(const e2i_config* cfg, long stop_after, e2i_progress_fn progress, void* user,
                     char** summary_json) {
  return guarded([&] {
    const auto s = pl::cmd_train(parse(cfg), wrap(progress, user), stop_after);
    put(summary_json, json{{"steps", s.steps},
                           {"resumed_from", s.resumed_from},
                           {"last_loss", s.last_loss},
                           {"samples", s.samples},
                           {"captions_dropped", s.captions_dropped},
                           {"empty_caption_fraction",
                            s.samples ? static_cast<double>(s.captions_dropped) / static_cast<double>(s.samples) : 0.0},
                           {"checkpoint", s.checkpoint_path},
                           {"checkpoint_id", s.checkpoint_id}}
                          .dump());
  });
}

e2i_status e2i_generate(const e2i_config* cfg, const char* checkpoint, const char* output_dir, int zero_eeg,
                        e2i_progress_fn progress, void* user, char** summary_json) {
  return guarded([&] {
    pl::GenerateOptions o;
    o.checkpoint = opt_str(checkpoint);
    o.output_dir = opt_str(output_dir);
    o.zero_eeg = zero_eeg != 0;
    const auto s = pl::cmd_generate(parse(cfg), o, wrap(progress, user));
    put(summary_json,
        json{{"count", s.count}, {"manifest", s.manifest_path}, {"checkpoint_id", s.checkpoint_id}}.dump());
  });
}

e2i_status e2i_ablate(const e2i_config* cfg, e2i_progress_fn progress, void* user, char** report_json,
                      char** table_text) {
  return guarded([&] {
    const auto r = pl::cmd_ablate(parse(cfg), wrap(progress, user));
    put(report_json, r.dump(2));
    put(table_text, pl::ablation_table(r));
  });
}

e2i_status e2i_evaluate(const char* manifest_path, const char* evaluator_path, const char* report_path,
                        e2i_report** out) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(evaluator_path, "evaluator_path");
    auto r = pl::cmd_evaluate(manifest_path, evaluator_path, opt_str(report_path));
    if (out) *out = new e2i_report{std::move(r)};
  });
}

e2i_status e2i_report_metrics(const e2i_report* r, e2i_metrics* out) {
  return guarded([&] {
    need(r, "report");
    need(out, "out");
    *out = {r->report.is_mean, r->report.is_std, r->report.fid, r->report.acc, r->report.lpips_mean,
            r->report.sample_count};
  });
}

e2i_status e2i_report_to_json(const e2i_report* r, char** out) {
  return guarded([&] {
    need(r, "report");
    need(out, "out");
    *out = dup(e2i::metrics::report_to_json(r->report).dump(2));
  });
}

e2i_status e2i_report_table(const e2i_report* r, char** out) {
  return guarded([&] {
    need(r, "report");
    need(out, "out");
    *out = dup(e2i::metrics::report_table_header() + "\n" + e2i::metrics::report_row("run", r->report) + "\n");
  });
}

void e2i_report_free(e2i_report* r) { delete r; }

e2i_status e2i_generator_open(const e2i_config* cfg, const char* checkpoint, e2i_generator** out) {
  return guarded([&] {
    need(out, "out");
    pl::RunConfig c = parse(cfg);
    c.validate();
    const std::string ck = checkpoint && *checkpoint
                               ? std::string(checkpoint)
                               : (std::filesystem::path(c.paths.checkpoint_dir) / pl::kRunCheckpointFile).string();
    auto bb = e2i::diffusion::load_backbone(e2i::diffusion::parse_backbone_kind(c.backbone.kind),
                                            pl::resolve_weights_path(c.backbone.path));
    auto dec = e2i::decoder::load_decoder(pl::resolve_weights_path(c.decoder.path));
    auto run = pl::load_run_checkpoint(ck, bb);
    auto names = run.meta.at("class_names").get<std::vector<std::string>>();
    *out = new e2i_generator{std::move(c), std::move(bb), std::move(dec), std::move(run), std::move(names)};
  });
}

int e2i_generator_image_size(const e2i_generator* g) { return g ? g->backbone.vae.image_size : 0; }
int e2i_generator_channels(const e2i_generator* g) { return g ? g->decoder.channels : 0; }

e2i_status e2i_generator_run(e2i_generator* g, const float* eeg, int channels, int length, int subject,
                             const e2i_generation_params* params, uint8_t* rgb_out, int* label_out) {
  return guarded([&] {
    need(g, "generator");
    need(eeg, "eeg");
    need(rgb_out, "rgb_out");
    if (channels < 1 || length < 1) throw e2i::ArgumentError("eeg dimensions must be positive");
    e2i::data::EEGRecording rec;
    rec.id = "input";
    rec.channels = channels;
    rec.length = length;
    rec.samples.assign(eeg, eeg + static_cast<std::size_t>(channels) * length);
    rec.subject_id = subject;
    rec.validate();
    const auto z = e2i::data::standardize(rec).eeg;

    e2i::diffusion::GenerationRequest req;
    req.eeg = z.to_tensor();
    req.subject = subject;
    const int label = e2i::decoder::decode_label(req.eeg, g->decoder);
    req.caption = e2i::decoder::make_caption(label, g->class_names);
    const auto& s = g->cfg.sampling;
    req.steps = params && params->steps > 0 ? params->steps : s.steps;
    req.guess_mode = params && params->guess_mode >= 0 ? params->guess_mode != 0 : s.guess_mode;
    req.zero_eeg = params && params->zero_eeg;
    req.stochastic = params ? params->stochastic != 0 : s.stochastic;
    req.guidance_scale = params && params->guidance_scale > 0 ? params->guidance_scale : s.guidance_scale;
    req.control_scales = s.scales;
    req.seed = params ? params->seed : g->cfg.require_seed();
    const auto res = e2i::diffusion::sample(g->backbone, &g->run.state, req);
    const auto q = e2i::data::quantize8(res.image);
    for (std::size_t i = 0; i < q.pixels.size(); ++i)
      rgb_out[i] = static_cast<uint8_t>(std::lround(std::clamp(q.pixels[i], 0.0, 1.0) * 255.0));
    if (label_out) *label_out = label;
  });
}

void e2i_generator_free(e2i_generator* g) { delete g; }

e2i_status e2i_fid(const double* real, size_t n_real, const double* generated, size_t n_generated, size_t dim,
                   double* out) {
  return guarded([&] {
    need(real, "real");
    need(generated, "generated");
    need(out, "out");
    auto rows = [dim](const double* p, size_t n) {
      std::vector<std::vector<double>> v(n);
      for (size_t i = 0; i < n; ++i) v[i].assign(p + i * dim, p + (i + 1) * dim);
      return v;
    };
    *out = e2i::metrics::fid(rows(real, n_real), rows(generated, n_generated));
  });
}

e2i_status e2i_inception_score(const double* posteriors, size_t n, size_t classes, int splits, double* mean,
                               double* stddev) {
  return guarded([&] {
    need(posteriors, "posteriors");
    std::vector<std::vector<double>> p(n);
    for (size_t i = 0; i < n; ++i) p[i].assign(posteriors + i * classes, posteriors + (i + 1) * classes);
    const auto s = e2i::metrics::inception_score(p, splits);
    if (mean) *mean = s.mean;
    if (stddev) *stddev = s.std;
  });
}

e2i_status e2i_nway_topk(const int* targets, const double* scores, size_t n, size_t classes, int n_way, int top_k,
                         uint64_t seed, double* out) {
  return guarded([&] {
    need(targets, "targets");
    need(scores, "scores");
    need(out, "out");
    std::vector<int> t(targets, targets + n);
    std::vector<std::vector<double>> s(n);
    for (size_t i = 0; i < n; ++i) s[i].assign(scores + i * classes, scores + (i + 1) * classes);
    *out = e2i::metrics::nway_topk_acc(t, s, n_way, top_k, seed);
  });
}

}  // extern "C"
