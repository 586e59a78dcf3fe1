#ifndef HCONS_H
#define HCONS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HconsClass {
  HCONS_CLASS_ALL_BOUNDED = 0,
  HCONS_CLASS_CONSTANT_BOUNDED = 1,
} HconsClass;

typedef enum HconsNegativeTheorem {
  HCONS_NEGATIVE_THEOREM_HUBER = 0,
  HCONS_NEGATIVE_THEOREM_SQ_EPS = 1,
  HCONS_NEGATIVE_THEOREM_EPS_FAR = 2,
  HCONS_NEGATIVE_THEOREM_EPS_NEAR = 3,
} HconsNegativeTheorem;

typedef enum HconsNorm {
  HCONS_NORM_L_INF = 0,
  HCONS_NORM_L2 = 1,
  HCONS_NORM_L1 = 2,
} HconsNorm;

typedef enum HconsObjective {
  HCONS_OBJECTIVE_SMOOTH_ADV = 0,
  HCONS_OBJECTIVE_ADV_SQ = 1,
} HconsObjective;

typedef enum HconsStatus {
  HCONS_STATUS_OK = 0,
  HCONS_STATUS_NULL_POINTER = 1,
  HCONS_STATUS_INVALID_ARGUMENT = 2,
  HCONS_STATUS_INVALID_DISTRIBUTION = 3,
  HCONS_STATUS_NOT_SYMMETRIC = 4,
  HCONS_STATUS_BOUND_INAPPLICABLE = 5,
  HCONS_STATUS_NON_CONVERGENCE = 6,
  HCONS_STATUS_IO = 7,
  HCONS_STATUS_PARSE = 8,
  HCONS_STATUS_DIMENSION_MISMATCH = 9,
  HCONS_STATUS_INTERNAL = 10,
  HCONS_STATUS_PANIC = 11,
} HconsStatus;

typedef struct HconsDataset HconsDataset;

typedef struct HconsDistribution HconsDistribution;

typedef struct HconsLoss HconsLoss;

typedef struct HconsModel HconsModel;

typedef struct HconsBoundResult {
  double lhs;
  double rhs;
  double slack;
  /**
   * 1 when the bound holds within tolerance, 0 otherwise.
   */
  int32_t holds;
} HconsBoundResult;

typedef struct HconsCounterexampleResult {
  double surrogate_err_hbar;
  double surrogate_err_hstar;
  double sq_regret_hbar;
  int32_t confirmed;
} HconsCounterexampleResult;

/**
 * Training options. `loss` is required for `SmoothAdv` and ignored for
 * `AdvSq`. A `projection_bound` of 0 means no box.
 */
typedef struct HconsTrainConfig {
  enum HconsObjective objective;
  const struct HconsLoss *loss;
  double gamma;
  double tau;
  enum HconsNorm norm;
  size_t max_iters;
  double tol;
  double step0;
  double projection_bound;
} HconsTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hcons_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hcons_version(void);

/**
 * Parses a loss such as `"squared"`, `"lp:3"`, `"huber:0.2"`, `"eps:0.1"` or `"sqeps:0.1"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HconsStatus hcons_loss_parse(const char *spec, struct HconsLoss **out);

/**
 * # Safety
 * `loss` must be NULL or a handle from [`hcons_loss_parse`] not yet freed.
 */
void hcons_loss_free(struct HconsLoss *loss);

/**
 * # Safety
 * `loss` must be a live handle and `out` a valid pointer.
 */
enum HconsStatus hcons_loss_value(const struct HconsLoss *loss,
                                  double prediction,
                                  double label,
                                  double *out);

/**
 * Parses a distribution from its JSON form
 * (`{"B": 1, "points": [{"id": "x0", "weight": 1, "cond": [[y, mass], ...]}]}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HconsStatus hcons_distribution_from_json(const char *json, struct HconsDistribution **out);

/**
 * # Safety
 * `dist` must be NULL or a live handle.
 */
void hcons_distribution_free(struct HconsDistribution *dist);

/**
 * Number of inputs, which is the length expected by [`hcons_verify_bound`].
 *
 * # Safety
 * `dist` must be a live handle.
 */
size_t hcons_distribution_num_inputs(const struct HconsDistribution *dist);

/**
 * Checks the consistency bound of `surrogate` for the hypothesis whose
 * predictions are `predictions[i]` at the `i`-th input of `dist`. The class
 * bound is the distribution's `B`.
 *
 * # Safety
 * Handles must be live, `predictions` must hold `len` values and `out` must
 * be a valid pointer.
 */
enum HconsStatus hcons_verify_bound(const struct HconsDistribution *dist,
                                    enum HconsClass class_,
                                    const double *predictions,
                                    size_t len,
                                    const struct HconsLoss *surrogate,
                                    struct HconsBoundResult *out);

/**
 * Builds and evaluates a negative-result construction; `param` is the Huber
 * delta or the epsilon.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HconsStatus hcons_counterexample_assert(enum HconsNegativeTheorem theorem,
                                             double bound,
                                             double y,
                                             double mu,
                                             double param,
                                             struct HconsCounterexampleResult *out);

/**
 * Copies `m` rows of `d` features (row-major) and `m` labels.
 *
 * # Safety
 * `features` must hold `m * d` values, `labels` `m` values, `out` must be valid.
 */
enum HconsStatus hcons_dataset_new(const double *features,
                                   const double *labels,
                                   size_t m,
                                   size_t d,
                                   struct HconsDataset **out);

/**
 * Loads a CSV file with a header row and the label in the last column.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HconsStatus hcons_dataset_load_csv(const char *path, struct HconsDataset **out);

/**
 * # Safety
 * `data` must be NULL or a live handle.
 */
void hcons_dataset_free(struct HconsDataset *data);

/**
 * Trains a linear model. Deterministic for identical inputs.
 *
 * # Safety
 * Handles and pointers must be valid; `config->loss` must be a live handle
 * for `SmoothAdv`.
 */
enum HconsStatus hcons_train(const struct HconsDataset *data,
                             const struct HconsTrainConfig *config,
                             struct HconsModel **out);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
void hcons_model_free(struct HconsModel *model);

/**
 * Number of weights.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t hcons_model_dim(const struct HconsModel *model);

/**
 * Copies the weights into `weights[0..len]`, the bias into `bias`, the final
 * objective into `objective` and the iteration count into `iters`. Any of the
 * last three may be NULL.
 *
 * # Safety
 * `weights` must hold `len` values; other non-NULL pointers must be valid.
 */
enum HconsStatus hcons_model_params(const struct HconsModel *model,
                                    double *weights,
                                    size_t len,
                                    double *bias,
                                    double *objective,
                                    size_t *iters);

/**
 * Clean and robust mean squared error of `model` on `data`.
 *
 * # Safety
 * Handles must be live and the output pointers valid.
 */
enum HconsStatus hcons_evaluate(const struct HconsModel *model,
                                const struct HconsDataset *data,
                                double gamma,
                                enum HconsNorm norm,
                                double *clean_mse,
                                double *robust_mse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HCONS_H */
