#ifndef STFNN_H
#define STFNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
enum StfnnStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  STFNN_STATUS_OK = 0,
  STFNN_STATUS_NULL_POINTER = 1,
  // Invalid input: bad arguments, malformed files, unknown names.
  STFNN_STATUS_INVALID = 2,
  // Singular fits, degenerate weights, diverged training.
  STFNN_STATUS_NUMERICAL = 3,
  STFNN_STATUS_IO = 4,
  STFNN_STATUS_PANIC = 5,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum StfnnStatus StfnnStatus;
#else
typedef int32_t StfnnStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// A spatial functional dataset.
typedef struct StfnnDataset StfnnDataset;

// A trained estimator.
typedef struct StfnnModel StfnnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *stfnn_last_error(void);

// Simulate a dataset; `scenario` is "sim1" or "sim2".
//
// # Safety
// `scenario` must be a NUL-terminated string and `out` a valid pointer.
StfnnStatus stfnn_dataset_simulate(const char *scenario, uint64_t seed, StfnnDataset **out);

// Load a dataset described by a manifest file.
//
// # Safety
// `manifest_path` must be a NUL-terminated string and `out` a valid pointer.
StfnnStatus stfnn_dataset_load(const char *manifest_path, StfnnDataset **out);

// Build a single-feature dataset from row-major arrays: `curves` holds `n`
// curves of `grid_points` values on a uniform grid over
// `[t_lower, t_upper]`, `locations` holds `n` rows of `dim` coordinates.
//
// # Safety
// The arrays must hold `n * grid_points`, `n * dim` and `n` doubles.
StfnnStatus stfnn_dataset_from_arrays(size_t n,
                                      size_t grid_points,
                                      double t_lower,
                                      double t_upper,
                                      const double *curves,
                                      size_t dim,
                                      const double *locations,
                                      const double *responses,
                                      StfnnDataset **out);

// Number of samples, 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t stfnn_dataset_len(const StfnnDataset *dataset);

// Responses of the dataset copied into `out` (length `len` = dataset size).
//
// # Safety
// `dataset` must be a live handle and `out` must hold `len` doubles.
StfnnStatus stfnn_dataset_responses(const StfnnDataset *dataset, double *out, size_t len);

// # Safety
// `dataset` must be null or a handle not yet freed.
void stfnn_dataset_free(StfnnDataset *dataset);

// Fit an estimator given by label (`FLM`, `FNN_SP`, `GWFNN_Gaussian`,
// `SARFNN_Nearest`, ...). A NaN `bandwidth` selects it by 5-fold CV;
// it is ignored by estimators without a kernel.
//
// # Safety
// `dataset` must be a live handle, `estimator` a NUL-terminated string and
// `out` a valid pointer.
StfnnStatus stfnn_model_fit(const StfnnDataset *dataset,
                            const char *estimator,
                            double bandwidth,
                            uint64_t seed,
                            StfnnModel **out);

// Bandwidth of a kernel model, NaN otherwise.
//
// # Safety
// `model` must be null or a live handle.
double stfnn_model_bandwidth(const StfnnModel *model);

// Predict from one single-feature curve of `len` values on the model's
// grid, observed at `location` (`dim` coordinates). Training locations use
// the in-sample predictor, other locations the out-of-sample one.
//
// # Safety
// `values` must hold `len` doubles, `location` `dim` doubles and `out` one.
StfnnStatus stfnn_model_predict(const StfnnModel *model,
                                const double *values,
                                size_t len,
                                const double *location,
                                size_t dim,
                                double *out);

// Predictions for every sample of `dataset`, written to `out` (length `len`).
//
// # Safety
// Handles must be live and `out` must hold `len` doubles.
StfnnStatus stfnn_model_predict_dataset(const StfnnModel *model,
                                        const StfnnDataset *dataset,
                                        double *out,
                                        size_t len);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
StfnnStatus stfnn_model_save(const StfnnModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
StfnnStatus stfnn_model_load(const char *path, StfnnModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void stfnn_model_free(StfnnModel *model);

// Mean fold RMSE of seeded `folds`-fold CV. A NaN `bandwidth` selects it
// by inner CV within every training fold.
//
// # Safety
// `dataset` must be a live handle, `estimator` a NUL-terminated string and
// `out_rmse` a valid pointer.
StfnnStatus stfnn_kfold_rmse(const StfnnDataset *dataset,
                             const char *estimator,
                             double bandwidth,
                             size_t folds,
                             uint64_t seed,
                             double *out_rmse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STFNN_H */
