#ifndef PMELAB_H
#define PMELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmeStatus {
  PME_STATUS_OK = 0,
  PME_STATUS_NULL_POINTER = 1,
  PME_STATUS_INVALID_ARGUMENT = 2,
  PME_STATUS_INVALID_GRID = 3,
  PME_STATUS_CFL_VIOLATED = 4,
  PME_STATUS_NON_FINITE = 5,
  PME_STATUS_HYPOTHESIS = 6,
  PME_STATUS_INVARIANT = 7,
  PME_STATUS_EMPTY_SET = 8,
  PME_STATUS_INSUFFICIENT = 9,
  PME_STATUS_IO = 10,
  PME_STATUS_PANIC = 11,
} PmeStatus;

typedef enum PmeAlternative {
  PME_ALTERNATIVE_UNION_BIG = 0,
  PME_ALTERNATIVE_ZERO_SET_BIG = 1,
  PME_ALTERNATIVE_NEITHER = 2,
} PmeAlternative;

/**
 * Solver output; opaque to C.
 */
typedef struct PmeTrajectory PmeTrajectory;

/**
 * Solver settings. The box is `[-half_width, half_width]^dim` with `nx`
 * nodes per axis; boundary nodes keep their initial values.
 */
typedef struct PmeSolveParams {
  size_t dim;
  size_t nx;
  double half_width;
  double lambda;
  double big_lambda;
  double b;
  /**
   * `+1` for the maximal operator, `-1` for the minimal one.
   */
  int32_t sign;
  double cfl_safety;
  double t_start;
  double t_final;
  /**
   * Spacing of stored slices; zero keeps every step.
   */
  double snapshot_dt;
} PmeSolveParams;

typedef struct PmeAbpResult {
  double sublevel_fraction;
  bool elliptic_regime;
  bool passed;
  double contact_t;
  double contact_u;
  size_t contact_count;
} PmeAbpResult;

typedef struct PmeSelectionResult {
  enum PmeAlternative alternative;
  double union_measure;
  double zero_set_measure;
  size_t selected_cubes;
  uint32_t deepest_generation;
  bool non_nested;
} PmeSelectionResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pme_last_error(void);

/**
 * Static nul-terminated version string.
 */
const char *pme_version(void);

/**
 * Maximal Pucci operator of the row-major symmetric `dim x dim` matrix `m`.
 *
 * # Safety
 * `m` must point to `dim * dim` doubles and `out` to one writable double.
 */
enum PmeStatus pme_pucci_plus(const double *m,
                              size_t dim,
                              double lambda,
                              double big_lambda,
                              double *out);

/**
 * Minimal Pucci operator.
 *
 * # Safety
 * As for [`pme_pucci_plus`].
 */
enum PmeStatus pme_pucci_minus(const double *m,
                               size_t dim,
                               double lambda,
                               double big_lambda,
                               double *out);

/**
 * Pressure with constant `c` in dimension `n` at `(x, t)`, `t > 0`.
 *
 * # Safety
 * `x` must point to `n` doubles and `out` to one writable double.
 */
enum PmeStatus pme_barenblatt_pressure(size_t n, double c, const double *x, double t, double *out);

/**
 * `(e.x + t)_+` with `e` and `x` of length `dim`.
 *
 * # Safety
 * `e` and `x` must point to `dim` doubles and `out` to one writable double.
 */
enum PmeStatus pme_traveling_front(const double *e,
                                   const double *x,
                                   size_t dim,
                                   double t,
                                   double *out);

/**
 * Solves from `initial` (row-major over the nodes, `len = nx^dim`) and
 * stores the result in `*out`.
 *
 * # Safety
 * `params` must be valid, `initial` must point to `len` doubles and `out`
 * to a writable pointer.
 */
enum PmeStatus pme_solve(const struct PmeSolveParams *params,
                         const double *initial,
                         size_t len,
                         struct PmeTrajectory **out);

/**
 * Releases a trajectory. Null is ignored.
 *
 * # Safety
 * `traj` must come from [`pme_solve`] and not be used afterwards.
 */
void pme_trajectory_free(struct PmeTrajectory *traj);

/**
 * Number of stored slices, or 0 for null.
 *
 * # Safety
 * `traj` must be null or a live trajectory.
 */
size_t pme_trajectory_n_times(const struct PmeTrajectory *traj);

/**
 * Nodes per slice, or 0 for null.
 *
 * # Safety
 * `traj` must be null or a live trajectory.
 */
size_t pme_trajectory_n_nodes(const struct PmeTrajectory *traj);

/**
 * Accepted solver steps, or 0 for null.
 *
 * # Safety
 * `traj` must be null or a live trajectory.
 */
size_t pme_trajectory_steps(const struct PmeTrajectory *traj);

/**
 * Copies the slice times into `out`, which holds `len` doubles.
 *
 * # Safety
 * `traj` must be live and `out` must point to `len` writable doubles.
 */
enum PmeStatus pme_trajectory_times(const struct PmeTrajectory *traj, double *out, size_t len);

/**
 * Copies slice `k` into `out`, which holds `len` doubles.
 *
 * # Safety
 * `traj` must be live and `out` must point to `len` writable doubles.
 */
enum PmeStatus pme_trajectory_slice(const struct PmeTrajectory *traj,
                                    size_t k,
                                    double *out,
                                    size_t len);

/**
 * Generation-zero measure estimate with level one and threshold `eta`,
 * using the ellipticity the trajectory was solved with.
 *
 * # Safety
 * `traj` must be live and `out` writable.
 */
enum PmeStatus pme_abp_check(const struct PmeTrajectory *traj,
                             double eta,
                             struct PmeAbpResult *out);

/**
 * Dyadic selection down to generation `k_max`.
 *
 * # Safety
 * `traj` must be live and `out` writable.
 */
enum PmeStatus pme_dyadic_select(const struct PmeTrajectory *traj,
                                 uint32_t k_max,
                                 struct PmeSelectionResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMELAB_H */
