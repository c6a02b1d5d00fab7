#ifndef E2I_E2I_H
#define E2I_E2I_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define E2I_API __declspec(dllexport)
#else
#define E2I_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum e2i_status {
  E2I_OK = 0,
  E2I_ERR_ARGUMENT = 1,
  E2I_ERR_IO = 2,
  E2I_ERR_CONFIG = 3,
  E2I_ERR_NUMERIC = 4,
  E2I_ERR_LOAD = 5,
  E2I_ERR_INTERNAL = 6
} e2i_status;

/* Message of the last failed call on this thread; never NULL. */
E2I_API const char* e2i_last_error(void);
E2I_API const char* e2i_version(void);
/* 0 debug, 1 info, 2 warn, 3 error, 4 off. */
E2I_API void e2i_set_log_level(int level);

/* Strings returned through char** out-parameters are released here. */
E2I_API void e2i_string_free(char* s);

typedef void (*e2i_progress_fn)(const char* stage, long done, long total, void* user);

/* ---- run configuration ---- */
typedef struct e2i_config e2i_config;

E2I_API e2i_status e2i_config_new(e2i_config** out);
E2I_API e2i_status e2i_config_load(const char* path, e2i_config** out);
E2I_API e2i_status e2i_config_from_json(const char* json_text, e2i_config** out);
/* "section.key=value"; value is parsed as JSON, else taken as a string. */
E2I_API e2i_status e2i_config_set(e2i_config* cfg, const char* assignment);
E2I_API e2i_status e2i_config_validate(const e2i_config* cfg);
E2I_API e2i_status e2i_config_to_json(const e2i_config* cfg, char** out);
E2I_API void e2i_config_free(e2i_config* cfg);

/* ---- commands ---- */
/* options_json: object with any of num_classes, channels, length,
   samples_per_class, variants_per_class, image_size, seed, num_subjects,
   sample_rate_hz, noise_std, test_fraction. NULL or "" uses defaults. */
E2I_API e2i_status e2i_synth(const char* options_json, const char* out_dir);

typedef struct e2i_ingest_options {
  const char* format; /* "eegcvpr40" or "thoughtviz" */
  const char* raw_root;
  const char* out_dir;
  int image_size;       /* <= 0: 64 */
  int window_length;    /* <= 0: 32 */
  double overlap;       /* < 0: 0.5 */
  int test_every;       /* <= 0: 5 */
} e2i_ingest_options;

/* summary_json may be NULL; otherwise receives {"num_classes", "samples", ...}. */
E2I_API e2i_status e2i_ingest(const e2i_ingest_options* opt, char** summary_json);

E2I_API e2i_status e2i_train_backbone(const e2i_config* cfg, e2i_progress_fn progress, void* user);
E2I_API e2i_status e2i_train_decoder(const e2i_config* cfg, double* heldout_accuracy, e2i_progress_fn progress,
                                     void* user);
E2I_API e2i_status e2i_train_evaluator(const e2i_config* cfg, e2i_progress_fn progress, void* user);
/* stop_after > 0 ends this invocation after that many steps. */
E2I_API e2i_status e2i_train(const e2i_config* cfg, long stop_after, e2i_progress_fn progress, void* user,
                             char** summary_json);
/* checkpoint and output_dir may be NULL to use the configured locations. */
E2I_API e2i_status e2i_generate(const e2i_config* cfg, const char* checkpoint, const char* output_dir, int zero_eeg,
                                e2i_progress_fn progress, void* user, char** summary_json);
E2I_API e2i_status e2i_ablate(const e2i_config* cfg, e2i_progress_fn progress, void* user, char** report_json,
                              char** table_text);

/* ---- metrics report ---- */
typedef struct e2i_report e2i_report;

typedef struct e2i_metrics {
  double is_mean;
  double is_std;
  double fid;
  double acc;
  double lpips_mean;
  size_t sample_count;
} e2i_metrics;

/* report_path may be NULL: metrics_report.json beside the manifest. */
E2I_API e2i_status e2i_evaluate(const char* manifest_path, const char* evaluator_path, const char* report_path,
                                e2i_report** out);
E2I_API e2i_status e2i_report_metrics(const e2i_report* r, e2i_metrics* out);
E2I_API e2i_status e2i_report_to_json(const e2i_report* r, char** out);
E2I_API e2i_status e2i_report_table(const e2i_report* r, char** out);
E2I_API void e2i_report_free(e2i_report* r);

/* ---- single-recording generation ---- */
typedef struct e2i_generator e2i_generator;

typedef struct e2i_generation_params {
  int steps;             /* <= 0: configured sampling.steps */
  int guess_mode;        /* < 0: configured; 0 off; 1 on */
  int zero_eeg;
  int stochastic;
  double guidance_scale; /* <= 0: configured */
  uint64_t seed;
} e2i_generation_params;

/* Loads backbone, decoder and trained run checkpoint (NULL: configured). */
E2I_API e2i_status e2i_generator_open(const e2i_config* cfg, const char* checkpoint, e2i_generator** out);
E2I_API int e2i_generator_image_size(const e2i_generator* g);
E2I_API int e2i_generator_channels(const e2i_generator* g);
/* eeg is channel-major [channels x length], raw (standardized here).
   rgb_out receives image_size * image_size * 3 bytes, row-major HWC.
   label_out (may be NULL) receives the decoded class. */
E2I_API e2i_status e2i_generator_run(e2i_generator* g, const float* eeg, int channels, int length, int subject,
                                     const e2i_generation_params* params, uint8_t* rgb_out, int* label_out);
E2I_API void e2i_generator_free(e2i_generator* g);

/* ---- metric primitives ---- */
/* Row-major [n x dim] feature matrices. */
E2I_API e2i_status e2i_fid(const double* real, size_t n_real, const double* generated, size_t n_generated, size_t dim,
                           double* out);
/* Row-major [n x classes] posteriors. */
E2I_API e2i_status e2i_inception_score(const double* posteriors, size_t n, size_t classes, int splits, double* mean,
                                       double* stddev);
/* scores row-major [n x classes]. */
E2I_API e2i_status e2i_nway_topk(const int* targets, const double* scores, size_t n, size_t classes, int n_way,
                                 int top_k, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif
