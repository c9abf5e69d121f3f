#ifndef ROBVAR_H
#define ROBVAR_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RobvarStatus {
  ROBVAR_STATUS_OK = 0,
  ROBVAR_STATUS_NULL_POINTER = 1,
  ROBVAR_STATUS_INVALID_ARGUMENT = 2,
  ROBVAR_STATUS_DIMENSION = 3,
  ROBVAR_STATUS_UNSTABLE = 4,
  ROBVAR_STATUS_NUMERICAL = 5,
  ROBVAR_STATUS_EXPLOSIVE = 6,
  ROBVAR_STATUS_IO = 7,
  ROBVAR_STATUS_PARSE = 8,
  ROBVAR_STATUS_BUFFER_TOO_SMALL = 9,
  ROBVAR_STATUS_PANIC = 10,
} RobvarStatus;

typedef enum RobvarLambdaMode {
  /**
   * `lambda_param` is the penalty level itself.
   */
  ROBVAR_LAMBDA_MODE_EXPLICIT = 0,
  /**
   * `lambda_param` is the rate constant `c`.
   */
  ROBVAR_LAMBDA_MODE_THEORY = 1,
} RobvarLambdaMode;

/**
 * Result of a VAR fit.
 */
typedef struct RobvarFit RobvarFit;

/**
 * VAR coefficient matrices.
 */
typedef struct RobvarModel RobvarModel;

/**
 * Observation matrix (rows are time points).
 */
typedef struct RobvarSeries RobvarSeries;

/**
 * Settings for [`robvar_fit_var`]; start from [`robvar_fit_options_default`].
 */
typedef struct RobvarFitOptions {
  size_t lag;
  double tau;
  double b;
  enum RobvarLambdaMode lambda_mode;
  double lambda_param;
  /**
   * Fixed step size; zero or negative selects `0.99 / L`.
   */
  double step;
  double tol;
  size_t max_iter;
  uint64_t seed;
} RobvarFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *robvar_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *robvar_version(void);

/**
 * Huber loss at `u` with threshold `tau`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum RobvarStatus robvar_huber_value(double u, double tau, double *out);

/**
 * Copy an `n × p` row-major buffer into a new series.
 *
 * # Safety
 * `data` must point to `n * p` doubles; `out` must be valid for writing.
 */
enum RobvarStatus robvar_series_new(const double *data,
                                    size_t n,
                                    size_t p,
                                    struct RobvarSeries **out);

/**
 * # Safety
 * `series` must come from this library and not be used afterwards.
 */
void robvar_series_free(struct RobvarSeries *series);

/**
 * # Safety
 * `series` must be a live handle; `n` and `p` valid for writing.
 */
enum RobvarStatus robvar_series_dims(const struct RobvarSeries *series, size_t *n, size_t *p);

/**
 * Copy the series into `out` (row-major, at least `n * p` values).
 *
 * # Safety
 * `series` must be live; `out` must hold `len` doubles.
 */
enum RobvarStatus robvar_series_copy(const struct RobvarSeries *series, double *out, size_t len);

/**
 * Build a VAR(d) model from `d` consecutive row-major `p × p` blocks
 * `B_1, …, B_d` (entry `(i, j)` of `B_k` multiplies `z_{t−k, i}` in the
 * equation for coordinate `j`).
 *
 * # Safety
 * `coeffs` must point to `d * p * p` doubles; `out` valid for writing.
 */
enum RobvarStatus robvar_model_new(const double *coeffs,
                                   size_t p,
                                   size_t d,
                                   struct RobvarModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void robvar_model_free(struct RobvarModel *model);

/**
 * # Safety
 * `model` must be live; `p` and `d` valid for writing.
 */
enum RobvarStatus robvar_model_dims(const struct RobvarModel *model, size_t *p, size_t *d);

/**
 * Copy the coefficient blocks into `out` in the layout of
 * [`robvar_model_new`] (`d * p * p` values).
 *
 * # Safety
 * `model` must be live; `out` must hold `len` doubles.
 */
enum RobvarStatus robvar_model_coefficients(const struct RobvarModel *model,
                                            double *out,
                                            size_t len);

/**
 * Spectral radius of the companion matrix.
 *
 * # Safety
 * `model` must be live; `out` valid for writing.
 */
enum RobvarStatus robvar_model_radius(const struct RobvarModel *model, double *out);

/**
 * Simulate `n` rows of the VAR with iid Student-t(`df`) noise after
 * `burn_in` discarded steps, retrying explosive paths up to 10 times.
 *
 * # Safety
 * `model` must be live; `out` valid for writing.
 */
enum RobvarStatus robvar_simulate_var_t(const struct RobvarModel *model,
                                        double df,
                                        size_t n,
                                        size_t burn_in,
                                        uint64_t seed,
                                        struct RobvarSeries **out);

struct RobvarFitOptions robvar_fit_options_default(void);

/**
 * Fit a robust sparse VAR to `series`.
 *
 * # Safety
 * `series` must be live; `options` and `out` valid pointers.
 */
enum RobvarStatus robvar_fit_var(const struct RobvarSeries *series,
                                 const struct RobvarFitOptions *options,
                                 struct RobvarFit **out);

/**
 * # Safety
 * `fit` must come from this library and not be used afterwards.
 */
void robvar_fit_free(struct RobvarFit *fit);

/**
 * Penalty level used, whether every column converged, and the largest
 * iteration count. Any output pointer may be NULL.
 *
 * # Safety
 * `fit` must be live; non-NULL outputs must be valid for writing.
 */
enum RobvarStatus robvar_fit_summary(const struct RobvarFit *fit,
                                     double *lambda,
                                     bool *converged,
                                     size_t *max_iterations);

/**
 * New model handle holding the estimated coefficients.
 *
 * # Safety
 * `fit` must be live; `out` valid for writing.
 */
enum RobvarStatus robvar_fit_model(const struct RobvarFit *fit, struct RobvarModel **out);

/**
 * `max_j ||â_j − a_j||` over stacked coefficient columns.
 *
 * # Safety
 * Both models must be live; `out` valid for writing.
 */
enum RobvarStatus robvar_estimation_error(const struct RobvarModel *estimate,
                                          const struct RobvarModel *truth,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBVAR_H */
