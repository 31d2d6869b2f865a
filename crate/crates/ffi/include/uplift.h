#ifndef UPLIFT_H
#define UPLIFT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum UpliftStatus {
  UPLIFT_STATUS_OK = 0,
  UPLIFT_STATUS_NULL_POINTER = 1,
  UPLIFT_STATUS_INVALID_UTF8 = 2,
  UPLIFT_STATUS_IO = 3,
  // Malformed CSV, header mismatch, bad cell or bad treatment labels.
  UPLIFT_STATUS_PARSE = 4,
  UPLIFT_STATUS_SCHEMA = 5,
  UPLIFT_STATUS_INVALID_PARAMETER = 6,
  UPLIFT_STATUS_SCHEMA_MISMATCH = 7,
  UPLIFT_STATUS_MODEL_FORMAT = 8,
  UPLIFT_STATUS_VERSION_MISMATCH = 9,
  UPLIFT_STATUS_EMPTY_DATASET = 10,
  UPLIFT_STATUS_TREATMENT_ABSENT = 11,
  UPLIFT_STATUS_BUFFER_TOO_SMALL = 12,
  UPLIFT_STATUS_PANIC = 13,
} UpliftStatus;

// Opaque dataset handle.
typedef struct UpliftDataset UpliftDataset;

// Opaque model handle (CTS forest or separate-model baseline).
typedef struct UpliftModel UpliftModel;

// CTS forest parameters. Zero `max_depth` means unlimited, zero
// `bootstrap` means one row per training row.
typedef struct UpliftCtsParams {
  size_t ntree;
  size_t min_split;
  size_t n_reg;
  size_t mtry;
  size_t max_depth;
  size_t bootstrap;
  uint64_t seed;
} UpliftCtsParams;

typedef struct UpliftSmaParams {
  size_t ntree;
  size_t mtry;
  size_t min_samples_leaf;
  uint64_t seed;
} UpliftSmaParams;

// Expected-response estimate with a normal confidence interval.
typedef struct UpliftReport {
  double estimate;
  double std_error;
  double ci_low;
  double ci_high;
  double conf_level;
  size_t n;
} UpliftReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a
// successful call. Valid until the next call on the same thread.
const char *uplift_last_error(void);

// Loads a CSV file. `schema_spec` is `name:role,...` with roles `numeric`,
// `categorical`, `treatment`, `response`, listing every column in order.
//
// # Safety
// `path` and `schema_spec` must be NUL-terminated strings; `out` must be
// writable.
enum UpliftStatus uplift_dataset_load_csv(const char *path,
                                          const char *schema_spec,
                                          struct UpliftDataset **out);

// # Safety
// `data` must be NULL or a handle from `uplift_dataset_load_csv` not yet freed.
void uplift_dataset_free(struct UpliftDataset *data);

// Row count, or 0 for NULL.
//
// # Safety
// `data` must be NULL or a live handle.
size_t uplift_dataset_len(const struct UpliftDataset *data);

// # Safety
// `data` must be NULL or a live handle.
size_t uplift_dataset_n_features(const struct UpliftDataset *data);

// # Safety
// `data` must be NULL or a live handle.
size_t uplift_dataset_n_treatments(const struct UpliftDataset *data);

// Default CTS parameters for `n_features` features.
struct UpliftCtsParams uplift_cts_params_default(size_t n_features);

// Default separate-model parameters for `n_features` features.
struct UpliftSmaParams uplift_sma_params_default(size_t n_features);

// # Safety
// `data` and `params` must be live/readable; `out` must be writable.
enum UpliftStatus uplift_train_cts(const struct UpliftDataset *data,
                                   const struct UpliftCtsParams *params,
                                   struct UpliftModel **out);

// # Safety
// `data` and `params` must be live/readable; `out` must be writable.
enum UpliftStatus uplift_train_sma(const struct UpliftDataset *data,
                                   const struct UpliftSmaParams *params,
                                   struct UpliftModel **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum UpliftStatus uplift_model_load(const char *path, struct UpliftModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum UpliftStatus uplift_model_save(const struct UpliftModel *model, const char *path);

// # Safety
// `model` must be NULL or a handle not yet freed.
void uplift_model_free(struct UpliftModel *model);

// # Safety
// `model` must be NULL or a live handle.
size_t uplift_model_n_features(const struct UpliftModel *model);

// # Safety
// `model` must be NULL or a live handle.
size_t uplift_model_n_treatments(const struct UpliftModel *model);

// Predicts one feature vector (categorical features as codes). Writes one
// estimate per treatment to `estimates` and the chosen treatment to `chosen`.
//
// # Safety
// `x` must hold `n_x` values, `estimates` room for `n_estimates`, and
// `chosen` must be writable.
enum UpliftStatus uplift_model_predict(const struct UpliftModel *model,
                                       const double *x,
                                       size_t n_x,
                                       double *estimates,
                                       size_t n_estimates,
                                       size_t *chosen);

// Expected response of the model's policy on `data`. With `n_probs == 0`
// the treatment frequencies of `data` serve as assignment probabilities.
//
// # Safety
// Handles must be live; `probs` must hold `n_probs` values; `out` writable.
enum UpliftStatus uplift_evaluate_model(const struct UpliftModel *model,
                                        const struct UpliftDataset *data,
                                        const double *probs,
                                        size_t n_probs,
                                        double conf_level,
                                        struct UpliftReport *out);

// Expected response of assigning `treatment` to every row of `data`.
//
// # Safety
// `data` must be live; `probs` must hold `n_probs` values; `out` writable.
enum UpliftStatus uplift_evaluate_constant(const struct UpliftDataset *data,
                                           size_t treatment,
                                           const double *probs,
                                           size_t n_probs,
                                           double conf_level,
                                           struct UpliftReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UPLIFT_H */
