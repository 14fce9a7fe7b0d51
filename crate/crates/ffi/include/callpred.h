#ifndef CALLPRED_H
#define CALLPRED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CpStatus {
  CP_STATUS_OK = 0,
  CP_STATUS_NULL_POINTER = 1,
  CP_STATUS_INVALID_UTF8 = 2,
  CP_STATUS_IO = 3,
  CP_STATUS_MALFORMED_INPUT = 4,
  CP_STATUS_INVALID_ARGUMENT = 5,
  CP_STATUS_UNKNOWN_EGO = 6,
  CP_STATUS_NOT_ELIGIBLE = 7,
  CP_STATUS_NUMERICAL = 8,
  CP_STATUS_BUFFER_TOO_SMALL = 9,
  CP_STATUS_PANIC = 10,
} CpStatus;

/**
 * A parsed call log.
 */
typedef struct CpDataset CpDataset;

/**
 * A trained per-ego model plus its class ids as C strings.
 */
typedef struct CpModel CpModel;

typedef struct CpTrainOptions {
  size_t min_events;
  double train_fraction;
  double reg_lambda;
  size_t max_iters;
  double tol;
} CpTrainOptions;

typedef struct CpQTest {
  double q_statistic;
  size_t lags_used;
  double p_value;
  bool reject_at_5pct;
} CpQTest;

typedef struct CpKsResult {
  double d_statistic;
  size_t n;
  double rate_estimate;
  double p_value;
  bool reject_at_5pct;
} CpKsResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * call that fails on the same thread; never null.
 */
const char *cp_last_error(void);

struct CpTrainOptions cp_train_options_default(void);

/**
 * Parses a call-log CSV. `utc_offset_secs` is the dataset's fixed offset.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum CpStatus cp_dataset_load(const char *path, int32_t utc_offset_secs, struct CpDataset **out);

/**
 * # Safety
 * `dataset` must come from `cp_dataset_load` and not be used afterwards.
 */
void cp_dataset_free(struct CpDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or null (which yields 0).
 */
size_t cp_dataset_n_egos(const struct CpDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or null (which yields 0).
 */
size_t cp_dataset_n_events(const struct CpDataset *dataset);

/**
 * Copies the id of ego `index` (in sorted order) into `buf`, NUL included.
 * `*needed` receives the required size even when `buf` is too small.
 *
 * # Safety
 * `buf` must hold `buf_len` bytes; `needed` may be null.
 */
enum CpStatus cp_dataset_ego_id(const struct CpDataset *dataset,
                                size_t index,
                                char *buf,
                                size_t buf_len,
                                size_t *needed);

/**
 * Trains the model for one ego. `options` may be null for defaults.
 *
 * # Safety
 * Pointers must be valid; `ego_id` a C string.
 */
enum CpStatus cp_model_train(const struct CpDataset *dataset,
                             const char *ego_id,
                             const struct CpTrainOptions *options,
                             struct CpModel **out);

/**
 * # Safety
 * `path` must be a C string, `out` valid.
 */
enum CpStatus cp_model_load(const char *path, struct CpModel **out);

/**
 * # Safety
 * `model` must be live, `path` a C string.
 */
enum CpStatus cp_model_save(const struct CpModel *model, const char *path);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void cp_model_free(struct CpModel *model);

/**
 * # Safety
 * `model` must be a live handle or null (which yields 0).
 */
size_t cp_model_n_classes(const struct CpModel *model);

/**
 * Id of class `index`, owned by the model; null when out of range.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
const char *cp_model_class_id(const struct CpModel *model, size_t index);

/**
 * Class probabilities at instant `t` (epoch seconds), using the ego's
 * events in `dataset` strictly before `t` as history. Writes
 * `cp_model_n_classes` values to `probs`.
 *
 * # Safety
 * `probs` must hold `len` doubles.
 */
enum CpStatus cp_model_predict_proba(const struct CpModel *model,
                                     const struct CpDataset *dataset,
                                     int64_t t,
                                     double *probs,
                                     size_t len);

/**
 * Indices of the `k` most probable classes at `t`, best first. Writes
 * `min(k, n_classes)` entries and stores that count in `*written`.
 *
 * # Safety
 * `indices` must hold `k` entries; `written` must be valid.
 */
enum CpStatus cp_model_top_k(const struct CpModel *model,
                             const struct CpDataset *dataset,
                             int64_t t,
                             size_t k,
                             size_t *indices,
                             size_t *written);

/**
 * Ljung–Box test of `series` with `max_lag` lags (capped at n/4).
 *
 * # Safety
 * `series` must hold `n` doubles; `out` must be valid.
 */
enum CpStatus cp_ljung_box(const double *series, size_t n, size_t max_lag, struct CpQTest *out);

/**
 * Upper tail of the chi-square distribution with `df` degrees of freedom.
 *
 * # Safety
 * `out` must be valid.
 */
enum CpStatus cp_chi_square_sf(double x, uint32_t df, double *out);

/**
 * One-sample KS test of positive `samples` against an exponential with
 * the maximum-likelihood rate.
 *
 * # Safety
 * `samples` must hold `n` doubles; `out` must be valid.
 */
enum CpStatus cp_ks_exponential(const double *samples, size_t n, struct CpKsResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CALLPRED_H */
