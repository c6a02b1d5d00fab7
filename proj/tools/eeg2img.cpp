// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "e2i/e2i.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code(e2i_status s) {
  switch (s) {
    case E2I_OK: return kExitOk;
    case E2I_ERR_ARGUMENT:
    case E2I_ERR_CONFIG: return kExitValidation;
    default: return kExitRuntime;
  }
}

const char* status_name(e2i_status s) {
  switch (s) {
    case E2I_OK: return "ok";
    case E2I_ERR_ARGUMENT: return "argument error";
    case E2I_ERR_IO: return "i/o error";
    case E2I_ERR_CONFIG: return "config error";
    case E2I_ERR_NUMERIC: return "numeric error";
    case E2I_ERR_LOAD: return "load error";
    default: return "internal error";
  }
}

int fail(e2i_status s) {
  std::cerr << "eeg2img: " << status_name(s) << ": " << e2i_last_error() << "\n";
  return exit_code(s);
}

struct Owned {
  char* p = nullptr;
  ~Owned() { e2i_string_free(p); }
};

struct ConfigHandle {
  e2i_config* cfg = nullptr;
  ~ConfigHandle() { e2i_config_free(cfg); }
};

void progress(const char* stage, long done, long total, void* user) {
  if (!*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "\r%s %ld/%ld", stage, done, total);
  if (done == total) std::fprintf(stderr, "\n");
}

// Loads --config (if any) and applies --set overrides in order.
e2i_status open_config(const std::string& path, const std::vector<std::string>& sets, ConfigHandle& h) {
  e2i_status s = path.empty() ? e2i_config_new(&h.cfg) : e2i_config_load(path.c_str(), &h.cfg);
  if (s != E2I_OK) return s;
  for (const auto& a : sets)
    if ((s = e2i_config_set(h.cfg, a.c_str())) != E2I_OK) return s;
  return E2I_OK;
}

void print_json(const char* text) {
  if (text) std::cout << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-conditioned image generation: data prep, training, sampling and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  bool quiet = false;
  int log_level = 1;
  app.add_flag("-q,--quiet", quiet, "No progress output");
  app.add_option("--log-level", log_level, "0 debug, 1 info, 2 warn, 3 error, 4 off")->check(CLI::Range(0, 4));

  auto with_config = [&](CLI::App* c) {
    c->add_option("-c,--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
    c->add_option("--set", sets, "Override, section.key=value (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic EEG/image corpus in the canonical layout");
  std::string synth_out, synth_opts;
  synth->add_option("-o,--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--options", synth_opts, "JSON object of corpus options (num_classes, samples_per_class, ...)");

  auto* ingest = app.add_subcommand("ingest", "Convert a raw EEGCVPR40 or ThoughtViz archive");
  std::string ing_format, ing_raw, ing_out;
  int ing_size = 64, ing_window = 32, ing_test_every = 5;
  double ing_overlap = 0.5;
  ingest->add_option("--format", ing_format, "eegcvpr40 | thoughtviz")->required();
  ingest->add_option("--raw", ing_raw, "Raw archive directory")->required();
  ingest->add_option("-o,--out", ing_out, "Output dataset directory")->required();
  ingest->add_option("--image-size", ing_size, "Stimulus image side length");
  ingest->add_option("--window", ing_window, "ThoughtViz window length");
  ingest->add_option("--overlap", ing_overlap, "ThoughtViz window overlap fraction");
  ingest->add_option("--test-every", ing_test_every, "ThoughtViz: every k-th recording per class is test");

  auto* tb = app.add_subcommand("train-backbone", "Train the toy latent diffusion backbone");
  with_config(tb);
  auto* td = app.add_subcommand("train-decoder", "Train the frozen EEG label decoder");
  with_config(td);
  auto* te = app.add_subcommand("train-evaluator", "Train the metric network");
  with_config(te);
  auto* train = app.add_subcommand("train", "Train adapter, projection and subject layer");
  with_config(train);
  long stop_after = 0;
  train->add_option("--stop-after", stop_after, "End this invocation after N steps (resumable)");

  auto* gen = app.add_subcommand("generate", "Generate images for selected evaluation EEGs");
  with_config(gen);
  std::string gen_ckpt, gen_out, gen_selector;
  bool gen_zero = false;
  gen->add_option("--checkpoint", gen_ckpt, "Run checkpoint (default: <checkpoint_dir>/run.e2i)");
  gen->add_option("-o,--out", gen_out, "Output directory (default: paths.output_dir)");
  gen->add_option("--selector", gen_selector, "all | subject=N | class=N | id=ID, comma-joined");
  gen->add_flag("--zero-eeg", gen_zero, "Zero the EEG latent (caption-only control)");
  auto* guess_opt = gen->add_flag("--guess-mode,!--no-guess-mode", "Override sampling.guess_mode");

  auto* eval = app.add_subcommand("evaluate", "Compute IS, FID, ACC and LPIPS over an evaluation manifest");
  std::string ev_manifest, ev_net, ev_report;
  eval->add_option("-m,--manifest", ev_manifest, "eval_manifest.json written by generate")->required();
  eval->add_option("--evaluator", ev_net, "Metric network weights")->required();
  eval->add_option("-o,--report", ev_report, "Report path (default: beside the manifest)");

  auto* abl = app.add_subcommand("ablate", "EEG-vs-caption-only comparison and drop x guess grid");
  with_config(abl);

  auto* show = app.add_subcommand("config", "Print the resolved config");
  with_config(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  e2i_set_log_level(log_level);
  bool show_progress = !quiet;
  e2i_progress_fn pf = progress;
  void* user = &show_progress;

  if (synth->parsed()) {
    const e2i_status s = e2i_synth(synth_opts.c_str(), synth_out.c_str());
    return s == E2I_OK ? kExitOk : fail(s);
  }
  if (ingest->parsed()) {
    e2i_ingest_options o{ing_format.c_str(), ing_raw.c_str(), ing_out.c_str(), ing_size, ing_window, ing_overlap,
                         ing_test_every};
    Owned summary;
    const e2i_status s = e2i_ingest(&o, &summary.p);
    if (s != E2I_OK) return fail(s);
    print_json(summary.p);
    return kExitOk;
  }
  if (eval->parsed()) {
    e2i_report* r = nullptr;
    e2i_status s = e2i_evaluate(ev_manifest.c_str(), ev_net.c_str(), ev_report.empty() ? nullptr : ev_report.c_str(), &r);
    if (s != E2I_OK) return fail(s);
    Owned table;
    s = e2i_report_table(r, &table.p);
    e2i_report_free(r);
    if (s != E2I_OK) return fail(s);
    std::cout << table.p;
    return kExitOk;
  }

  ConfigHandle h;
  if (gen->parsed()) {
    if (!gen_selector.empty()) sets.push_back("sampling.selector=" + gen_selector);
    if (guess_opt->count() > 0) sets.push_back(std::string("sampling.guess_mode=") + (guess_opt->as<bool>() ? "true" : "false"));
  }
  e2i_status s = open_config(config_path, sets, h);
  if (s != E2I_OK) return fail(s);
  if ((s = e2i_config_validate(h.cfg)) != E2I_OK) return fail(s);

  Owned out, extra;
  if (show->parsed()) {
    s = e2i_config_to_json(h.cfg, &out.p);
  } else if (tb->parsed()) {
    s = e2i_train_backbone(h.cfg, pf, user);
  } else if (td->parsed()) {
    double acc = 0;
    s = e2i_train_decoder(h.cfg, &acc, pf, user);
    if (s == E2I_OK) std::cout << nlohmann::json{{"heldout_accuracy", acc}}.dump() << "\n";
  } else if (te->parsed()) {
    s = e2i_train_evaluator(h.cfg, pf, user);
  } else if (train->parsed()) {
    s = e2i_train(h.cfg, stop_after, pf, user, &out.p);
  } else if (gen->parsed()) {
    s = e2i_generate(h.cfg, gen_ckpt.empty() ? nullptr : gen_ckpt.c_str(), gen_out.empty() ? nullptr : gen_out.c_str(),
                     gen_zero ? 1 : 0, pf, user, &out.p);
  } else if (abl->parsed()) {
    s = e2i_ablate(h.cfg, pf, user, nullptr, &out.p);
  }
  if (s != E2I_OK) return fail(s);
  if (out.p) std::cout << out.p << (abl->parsed() ? "" : "\n");
  return kExitOk;
}
