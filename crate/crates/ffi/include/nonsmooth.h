#ifndef NONSMOOTH_H
#define NONSMOOTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NsMode {
  NS_MODE_SMOOTH = 0,
  NS_MODE_FLOW_PLUS = 1,
  NS_MODE_FLOW_MINUS = 2,
  NS_MODE_SLIDING = 3,
} NsMode;

typedef enum NsSigmaKind {
  NS_SIGMA_KIND_SEWING = 0,
  NS_SIGMA_KIND_SLIDING_ATTRACTING = 1,
  NS_SIGMA_KIND_SLIDING_REPELLING = 2,
  NS_SIGMA_KIND_TANGENCY_PLUS = 3,
  NS_SIGMA_KIND_TANGENCY_MINUS = 4,
} NsSigmaKind;

/**
 * Result code of every call.
 */
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_UTF8 = 2,
  NS_STATUS_INVALID_ARGUMENT = 3,
  NS_STATUS_UNKNOWN_EXAMPLE = 4,
  NS_STATUS_PARSE_ERROR = 5,
  NS_STATUS_DOMAIN_ERROR = 6,
  NS_STATUS_BUFFER_TOO_SMALL = 7,
  NS_STATUS_PANIC = 8,
} NsStatus;

/**
 * A piecewise-smooth system together with its regularization.
 */
typedef struct NsSystem NsSystem;

/**
 * Samples of a Filippov trajectory.
 */
typedef struct NsTrajectory NsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *ns_last_error(void);

/**
 * Builds one of the built-in examples (`ex-s2-1`, `ex-exblow`, ...).
 *
 * # Safety
 * `name` must be a valid C string and `out` a valid pointer.
 */
enum NsStatus ns_system_from_example(const char *name, struct NsSystem **out);

/**
 * Builds a system from configuration text.
 *
 * # Safety
 * `config` must be a valid C string and `out` a valid pointer.
 */
enum NsStatus ns_system_from_config(const char *config, struct NsSystem **out);

/**
 * # Safety
 * `sys` must come from `ns_system_from_*` and not be used afterwards. Null is ignored.
 */
void ns_system_free(struct NsSystem *sys);

/**
 * # Safety
 * `sys` and `out` must be valid pointers.
 */
enum NsStatus ns_system_dim(const struct NsSystem *sys, size_t *out);

/**
 * Filippov class of a point of the switching manifold.
 *
 * # Safety
 * `point` must hold `len` doubles; `sys` and `out` must be valid.
 */
enum NsStatus ns_classify_point(const struct NsSystem *sys,
                                const double *point,
                                size_t len,
                                enum NsSigmaKind *out);

/**
 * Sliding vector field at a sliding point, written to `out[0..dim]`.
 *
 * # Safety
 * `point` must hold `len` doubles and `out` `out_len` doubles.
 */
enum NsStatus ns_sliding_vf(const struct NsSystem *sys,
                            const double *point,
                            size_t len,
                            double *out,
                            size_t out_len);

/**
 * Weight `s` with `X^s = s X⁺ + (1 − s) X⁻` tangent to the switching manifold.
 *
 * # Safety
 * `point` must hold `len` doubles; `sys` and `out` must be valid.
 */
enum NsStatus ns_convex_coefficient(const struct NsSystem *sys,
                                    const double *point,
                                    size_t len,
                                    double *out);

/**
 * Regularized field `X^δ` at any point, with the system's configured transition.
 *
 * # Safety
 * `point` must hold `len` doubles and `out` `out_len` doubles.
 */
enum NsStatus ns_regularized_eval(const struct NsSystem *sys,
                                  const double *point,
                                  size_t len,
                                  double delta,
                                  double *out,
                                  size_t out_len);

/**
 * Integrates the Filippov flow from `x0` over `[t0, t1]`.
 *
 * # Safety
 * `x0` must hold `len` doubles; `sys` and `out` must be valid.
 */
enum NsStatus ns_integrate_filippov(const struct NsSystem *sys,
                                    const double *x0,
                                    size_t len,
                                    double t0,
                                    double t1,
                                    double rtol,
                                    double atol,
                                    struct NsTrajectory **out);

/**
 * Number of samples.
 *
 * # Safety
 * `traj` must be valid or null.
 */
size_t ns_trajectory_len(const struct NsTrajectory *traj);

/**
 * State dimension of every sample.
 *
 * # Safety
 * `traj` must be valid or null.
 */
size_t ns_trajectory_dim(const struct NsTrajectory *traj);

/**
 * Copies sample `index`: time, mode and `dim` state components.
 *
 * # Safety
 * `traj` must be valid; `state` must hold `state_len` doubles.
 */
enum NsStatus ns_trajectory_sample(const struct NsTrajectory *traj,
                                   size_t index,
                                   double *t,
                                   enum NsMode *mode,
                                   double *state,
                                   size_t state_len);

/**
 * # Safety
 * `traj` must come from `ns_integrate_filippov` and not be used afterwards. Null is ignored.
 */
void ns_trajectory_free(struct NsTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONSMOOTH_H */
