#ifndef TEXWEAVE_TEXWEAVE_H
#define TEXWEAVE_TEXWEAVE_H

#include <stdint.h>

#if defined(TEXWEAVE_BUILDING)
#define TW_API __attribute__((visibility("default")))
#else
#define TW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tw_status {
  TW_OK = 0,
  TW_ERR_INVALID_ARGUMENT = 1,
  TW_ERR_DATASET_LAYOUT = 2,
  TW_ERR_IO = 3,
  TW_ERR_INTEGRITY = 4,
  TW_ERR_FINGERPRINT = 5,
  TW_ERR_CONFIG = 6,
  TW_ERR_NUMERIC = 7,
  TW_ERR_UNDEFINED_METRIC = 8,
  TW_ERR_SYNTHESIS = 9,
  TW_ERR_INTERNAL = 99
} tw_status;

typedef struct tw_config tw_config;
typedef struct tw_model tw_model;
typedef struct tw_report tw_report;

/* Message of the last failed call on this thread; empty after a success. */
TW_API const char* tw_last_error(void);
TW_API const char* tw_version(void);
/* Frees strings returned through char** out-parameters. */
TW_API void tw_string_free(char* s);

/* Configuration. `toy` selects the small preset. */
TW_API tw_status tw_config_new(int toy, tw_config** out);
TW_API void tw_config_free(tw_config* config);
/* Overlays keys from an INI file or string. */
TW_API tw_status tw_config_merge_file(tw_config* config, const char* path);
TW_API tw_status tw_config_merge_text(tw_config* config, const char* text);
/* key is "section.key". */
TW_API tw_status tw_config_set(tw_config* config, const char* key, const char* value);
TW_API tw_status tw_config_get(const tw_config* config, const char* key, char** out);
TW_API tw_status tw_config_serialize(const tw_config* config, char** out);
TW_API tw_status tw_config_validate(const tw_config* config);

/* Procedural striped class plus an anomaly-source directory under root. */
TW_API tw_status tw_make_toy_dataset(const char* root, int resolution, uint64_t seed);

/* Regenerates one synthetic pool and writes it to out_dir. Reports the sample count. */
TW_API tw_status tw_synth(const tw_config* config, const char* out_dir, int* count);

/* Trains into out_dir. resume may be NULL; stop_epoch < 0 runs to the configured end. */
TW_API tw_status tw_train(const tw_config* config, const char* out_dir, const char* resume, int stop_epoch);

TW_API tw_status tw_model_load(const char* checkpoint, tw_model** out);
TW_API void tw_model_free(tw_model* model);
TW_API tw_status tw_model_resolution(const tw_model* model, int* out);
TW_API tw_status tw_model_forward_calls(const tw_model* model, uint64_t* out);

/* Anomaly map of one image, written as 8-bit grayscale. positive_fraction may be NULL. */
TW_API tw_status tw_infer_image(const tw_model* model, const char* image, const char* out_png,
                                double* positive_fraction);
/* Maps for every test item of the configured dataset into out_dir. */
TW_API tw_status tw_infer_dataset(const tw_model* model, const tw_config* config, const char* out_dir, int* count);

/* Evaluates under config's eval.setting; map_dir may be NULL. */
TW_API tw_status tw_eval(const tw_model* model, const tw_config* config, const char* map_dir, tw_report** out);
TW_API void tw_report_free(tw_report* report);
TW_API tw_status tw_report_jsonl(const tw_report* report, char** out);
TW_API tw_status tw_report_table(const tw_report* report, char** out);
TW_API tw_status tw_report_f1(const tw_report* report, double* out);
/* *out is NaN when AUROC is undefined. */
TW_API tw_status tw_report_auroc(const tw_report* report, double* out);
TW_API tw_status tw_report_consistent(const tw_report* report, int* out);

/* Perturbed copy of the configured test split in the dataset layout. */
TW_API tw_status tw_perturb(const tw_config* config, const char* out_dir);

/* JSON timing statistics over the configured test images. */
TW_API tw_status tw_bench(const tw_model* model, const tw_config* config, char** json);

/* rows: comma list such as "G,G.S.C.M"; opacities: comma list of opacity modes.
   Trains and evaluates each pair under out_dir and returns the consolidated table. */
TW_API tw_status tw_ablate(const tw_config* config, const char* rows, const char* opacities, const char* out_dir,
                           char** table);

#ifdef __cplusplus
}
#endif

#endif
