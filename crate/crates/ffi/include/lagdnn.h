#ifndef LAGDNN_H
#define LAGDNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum LagdnnMethod {
  LAGDNN_METHOD_BISECTION = 0,
  LAGDNN_METHOD_NEWTON = 1,
  LAGDNN_METHOD_SECANT = 2,
} LagdnnMethod;

typedef enum LagdnnRhoMode {
  /**
   * One plus the number of variables; requires every variable binary.
   */
  LAGDNN_RHO_MODE_AUTO = 0,
  /**
   * One plus the QAP size. QAP problems only.
   */
  LAGDNN_RHO_MODE_QAP_TIGHT = 1,
  /**
   * Use `LagdnnParams::rho`.
   */
  LAGDNN_RHO_MODE_VALUE = 2,
} LagdnnRhoMode;

typedef enum LagdnnStatus {
  LAGDNN_STATUS_OK = 0,
  LAGDNN_STATUS_NULL_POINTER = 1,
  LAGDNN_STATUS_INVALID_ARGUMENT = 2,
  LAGDNN_STATUS_PARSE = 3,
  LAGDNN_STATUS_IO = 4,
  LAGDNN_STATUS_NUMERICAL = 5,
  /**
   * The run stopped on its time limit or outer-iteration budget. The
   * result handle is still produced and holds a valid bound.
   */
  LAGDNN_STATUS_PARTIAL = 6,
  LAGDNN_STATUS_PANIC = 7,
} LagdnnStatus;

/**
 * Opaque problem handle.
 */
typedef struct LagdnnProblem LagdnnProblem;

/**
 * Opaque result handle.
 */
typedef struct LagdnnResult LagdnnResult;

/**
 * Solver settings. Obtain defaults from [`lagdnn_params_default`].
 * `y0`, `y1` and `lb0` are ignored when NaN; `time_limit` when not positive.
 */
typedef struct LagdnnParams {
  enum LagdnnMethod method;
  double lambda;
  enum LagdnnRhoMode rho_mode;
  double rho;
  double delta;
  double eps;
  double tol;
  double alpha;
  size_t max_apg_iter;
  size_t max_outer;
  double y0;
  double y1;
  double lb0;
  /**
   * Seconds.
   */
  double time_limit;
} LagdnnParams;

/**
 * One outer iteration.
 */
typedef struct LagdnnTraceEntry {
  double y;
  double g;
  double lb_valid;
  size_t apg_iters;
  /**
   * 0 converged, 1 zero X, 2 not converged.
   */
  int apg_status;
} LagdnnTraceEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *lagdnn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lagdnn_version(void);

struct LagdnnParams lagdnn_params_default(void);

/**
 * Binary QP `min v^T F v` (or `max` when `maximize` is nonzero) from a
 * row-major `r x r` symmetric matrix.
 *
 * # Safety
 * `f` must point to `r * r` doubles and `out` to writable storage for a
 * handle pointer.
 */
enum LagdnnStatus lagdnn_problem_bqp(const double *f,
                                     size_t r,
                                     int maximize,
                                     struct LagdnnProblem **out);

/**
 * QAP with flow `a` and distance `b`, both row-major `r x r`.
 *
 * # Safety
 * `a` and `b` must each point to `r * r` doubles and `out` to writable
 * storage for a handle pointer.
 */
enum LagdnnStatus lagdnn_problem_qap(const double *a,
                                     const double *b,
                                     size_t r,
                                     struct LagdnnProblem **out);

/**
 * Reads a BIQMAC or QAPLIB file, detecting the format. BIQMAC data is
 * maximized, as in the library.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable storage for a
 * handle pointer.
 */
enum LagdnnStatus lagdnn_problem_read(const char *path, struct LagdnnProblem **out);

/**
 * Problem size `r`, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live problem handle.
 */
size_t lagdnn_problem_size(const struct LagdnnProblem *p);

/**
 * # Safety
 * `p` must be NULL or a handle from a `lagdnn_problem_*` constructor that
 * has not been freed.
 */
void lagdnn_problem_free(struct LagdnnProblem *p);

/**
 * Computes a certified lower bound. On `Ok` or `Partial`, `*out` receives
 * a result handle; otherwise it is set to NULL.
 *
 * # Safety
 * `p` must be a live problem handle, `params` NULL (defaults) or a valid
 * pointer, and `out` writable storage for a handle pointer.
 */
enum LagdnnStatus lagdnn_solve(const struct LagdnnProblem *p,
                               const struct LagdnnParams *params,
                               struct LagdnnResult **out);

/**
 * Certified lower bound (NaN for NULL).
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
double lagdnn_result_lb_valid(const struct LagdnnResult *res);

/**
 * Last probed Lagrangian parameter (NaN for NULL).
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
double lagdnn_result_y_final(const struct LagdnnResult *res);

/**
 * # Safety
 * `res` must be NULL or a live result handle.
 */
size_t lagdnn_result_outer_iters(const struct LagdnnResult *res);

/**
 * # Safety
 * `res` must be NULL or a live result handle.
 */
size_t lagdnn_result_total_apg_iters(const struct LagdnnResult *res);

/**
 * Seconds.
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
double lagdnn_result_wall_time(const struct LagdnnResult *res);

/**
 * 0 converged, 1 outer budget exhausted, 2 time limit, -1 for NULL.
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
int lagdnn_result_status(const struct LagdnnResult *res);

/**
 * Copies trace entry `k` into `*entry`.
 *
 * # Safety
 * `res` must be a live result handle and `entry` writable.
 */
enum LagdnnStatus lagdnn_result_trace(const struct LagdnnResult *res,
                                      size_t k,
                                      struct LagdnnTraceEntry *entry);

/**
 * Result as one JSON line. Release with [`lagdnn_string_free`].
 *
 * # Safety
 * `res` must be a live result handle and `out` writable.
 */
enum LagdnnStatus lagdnn_result_json(const struct LagdnnResult *res, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void lagdnn_string_free(char *s);

/**
 * # Safety
 * `r` must be NULL or a handle from [`lagdnn_solve`] that has not been freed.
 */
void lagdnn_result_free(struct LagdnnResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAGDNN_H */
