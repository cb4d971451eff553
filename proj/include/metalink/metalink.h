#ifndef METALINK_METALINK_H
#define METALINK_METALINK_H

/* C interface to the metalink library. Every fallible call returns an
 * mtl_status; on failure mtl_last_error() describes the problem for the
 * calling thread. Handles are opaque and owned by the caller. */

#include <stddef.h>
#include <stdint.h>

#if defined(METALINK_BUILDING_SHARED)
#define MTL_API __attribute__((visibility("default")))
#else
#define MTL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtl_status {
  MTL_OK = 0,
  MTL_ERR_ARGUMENT = 1,
  MTL_ERR_CONFIG = 2,
  MTL_ERR_NUMERIC = 3,
  MTL_ERR_IO = 4,
  MTL_ERR_INTERRUPTED = 5,
  MTL_ERR_INTERNAL = 6
} mtl_status;

typedef struct mtl_config mtl_config;
typedef struct mtl_model mtl_model;

MTL_API const char* mtl_version(void);
MTL_API const char* mtl_git_describe(void);

/* Message of the last failed call on this thread, "" after a success. */
MTL_API const char* mtl_last_error(void);
/* Offending key when the last failure was MTL_ERR_CONFIG, else "". */
MTL_API const char* mtl_last_error_key(void);

/* ---- configuration ---------------------------------------------------- */

MTL_API mtl_status mtl_config_default(mtl_config** out);
MTL_API mtl_status mtl_config_load(const char* path, mtl_config** out);
MTL_API mtl_status mtl_config_parse(const char* text, mtl_config** out);
MTL_API mtl_status mtl_config_set(mtl_config* cfg, const char* key, const char* value);
/* Writes the value of `key` as text. `needed` (optional) receives the size
 * including the terminator; MTL_ERR_ARGUMENT if `cap` is too small. */
MTL_API mtl_status mtl_config_get(const mtl_config* cfg, const char* key, char* buf, size_t cap,
                                  size_t* needed);
MTL_API mtl_status mtl_config_validate(const mtl_config* cfg);
MTL_API void mtl_config_free(mtl_config* cfg);

/* ---- runs ------------------------------------------------------------- */

typedef void (*mtl_log_fn)(const char* line, void* user);
/* Progress lines from train/eval/sweep; NULL silences. May be called from
 * worker threads, one call at a time. */
MTL_API void mtl_set_log(mtl_log_fn fn, void* user);

/* Each writes its outputs under out_dir. On MTL_ERR_INTERRUPTED the results
 * gathered so far have been written. */
MTL_API mtl_status mtl_train(const mtl_config* cfg, const char* out_dir);
/* Evaluates the checkpoints a previous mtl_train wrote to out_dir. */
MTL_API mtl_status mtl_eval(const mtl_config* cfg, const char* out_dir);
MTL_API mtl_status mtl_sweep(const mtl_config* cfg, const char* out_dir);

/* Async-signal-safe. Running calls stop at the next frame or evaluation. */
MTL_API void mtl_request_stop(void);
MTL_API void mtl_clear_stop(void);

typedef struct mtl_check {
  const char* name;
  int passed;
  const char* detail;
  double seconds;
} mtl_check;
typedef void (*mtl_check_fn)(const mtl_check* check, void* user);

/* Runs the oracle suites; `failures` receives the number that failed. */
MTL_API mtl_status mtl_selftest(uint64_t seed, mtl_check_fn fn, void* user, int* failures);

/* ---- models ----------------------------------------------------------- */

typedef enum mtl_model_kind { MTL_MODEL_ENCODER = 0, MTL_MODEL_DECODER = 1 } mtl_model_kind;

typedef struct mtl_model_info {
  mtl_model_kind kind;
  int k;
  int n;
  int taps;   /* decoder only */
  int hidden;
  double es;    /* encoder only */
  double sigma; /* encoder only */
  size_t num_params;
} mtl_model_info;

MTL_API mtl_status mtl_model_load(const char* path, mtl_model** out);
MTL_API mtl_status mtl_model_save(const mtl_model* model, const char* path);
MTL_API void mtl_model_free(mtl_model* model);
MTL_API mtl_status mtl_model_info_get(const mtl_model* model, mtl_model_info* out);
/* Encoder: normalised codeword of `message` as 2n interleaved (re, im). */
MTL_API mtl_status mtl_model_encode(const mtl_model* model, int message, double* out, size_t len);
/* Decoder: `y` holds 2(n+L-1) interleaved values; writes 2^k probabilities. */
MTL_API mtl_status mtl_model_decode_probs(const mtl_model* model, const double* y, size_t y_len,
                                          double* probs, size_t probs_len);

#ifdef __cplusplus
}
#endif

#endif /* METALINK_METALINK_H */
