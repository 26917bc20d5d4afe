#ifndef UIRD_UIRD_H
#define UIRD_UIRD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UIRD_API __declspec(dllexport)
#else
#define UIRD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uird_status {
  UIRD_OK = 0,
  UIRD_ERR_VALIDATION = 1, /* bad config or arguments */
  UIRD_ERR_PARSE = 2,      /* malformed input file */
  UIRD_ERR_IO = 3,
  UIRD_ERR_SHAPE = 4,
  UIRD_ERR_DIVERGENCE = 5, /* non-finite loss during training */
  UIRD_ERR_RUNTIME = 6,
  UIRD_ERR_ARGUMENT = 7 /* null handle or pointer */
} uird_status;

typedef struct uird_config uird_config;
typedef struct uird_run uird_run;

UIRD_API const char* uird_version(void);
UIRD_API const char* uird_status_name(uird_status status);
/* Message of the last failed call on this thread; "" after a success. */
UIRD_API const char* uird_last_error(void);

/* Strings returned through char** are owned by the caller. */
UIRD_API void uird_string_free(char* s);

/* Overrides are "key.path=value" assignments applied before validation. */
UIRD_API uird_status uird_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                                      uird_config** out);
UIRD_API uird_status uird_config_load_text(const char* json_text, const char* base_dir,
                                           const char* const* overrides, size_t n_overrides, uird_config** out);
UIRD_API void uird_config_free(uird_config* cfg);
UIRD_API const char* uird_config_name(const uird_config* cfg);
UIRD_API uint64_t uird_config_seed(const uird_config* cfg);
/* Output root from the config, else $UIRD_OUTPUT_ROOT, else "runs". */
UIRD_API const char* uird_config_output_dir(const uird_config* cfg);
/* Effective config document (after overrides) as JSON. */
UIRD_API uird_status uird_config_json(const uird_config* cfg, char** out);

/* Runs the task sequence for the given strategies ("uird", "ewc", "joint",
   "madegan_only"); novelty detection is shared between them. */
UIRD_API uird_status uird_run_sequence(const uird_config* cfg, const char* const* strategies, size_t n_strategies,
                                       uird_run** out);
UIRD_API void uird_run_free(uird_run* run);
UIRD_API size_t uird_run_task_count(const uird_run* run);
/* Class symbols in arrival order. */
UIRD_API const char* uird_run_class_order(const uird_run* run);
/* Writes <dir>/task_<i>/... and manifest.json for one strategy. The
   directory must be absent or empty. */
UIRD_API uird_status uird_run_write(const uird_run* run, const char* strategy, const char* dir,
                                    char** content_hash);
/* Decision log of every task, one line each. */
UIRD_API uird_status uird_run_log(const uird_run* run, char** out);
/* JSON array of the strategy's task reports. */
UIRD_API uird_status uird_run_reports_json(const uird_run* run, const char* strategy, char** out);

/* Summaries are JSON documents. */
UIRD_API uird_status uird_ingest(const uird_config* cfg, const char* out_dir, char** summary);
UIRD_API uird_status uird_synth_data(const uird_config* cfg, const char* out_dir, char** summary);
/* format: "markdown", "csv" or "json". */
UIRD_API uird_status uird_report(const char* const* run_dirs, size_t n_dirs, const char* format, char** out);

#ifdef __cplusplus
}
#endif

#endif
