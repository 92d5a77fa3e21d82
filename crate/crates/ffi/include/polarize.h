#ifndef POLARIZE_H
#define POLARIZE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PolarizeStatus {
  POLARIZE_STATUS_OK = 0,
  POLARIZE_STATUS_NULL_POINTER = 1,
  POLARIZE_STATUS_INVALID_ARGUMENT = 2,
  POLARIZE_STATUS_SOLVER_FAILURE = 3,
  POLARIZE_STATUS_IO = 4,
  POLARIZE_STATUS_PANIC = 5,
} PolarizeStatus;

/**
 * Which phase is the matrix of a laminate.
 */
typedef enum PolarizeMatrixPhase {
  POLARIZE_MATRIX_PHASE_GAMMA0 = 0,
  POLARIZE_MATRIX_PHASE_GAMMA1 = 1,
} PolarizeMatrixPhase;

/**
 * Cell homogenization result handle.
 */
typedef struct PolarizeHomogenization PolarizeHomogenization;

/**
 * Sequential laminate handle.
 */
typedef struct PolarizeLaminate PolarizeLaminate;

/**
 * Periodic pixel cell handle.
 */
typedef struct PolarizeMicrostructure PolarizeMicrostructure;

/**
 * Symmetric tensor handle.
 */
typedef struct PolarizeTensor PolarizeTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the thread.
 */
const char *polarize_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *polarize_version(void);

/**
 * Tensor from `dim * dim` row-major entries, which must be symmetric.
 *
 * # Safety
 * `entries` must point to `dim * dim` doubles and `out` to writable storage.
 */
enum PolarizeStatus polarize_tensor_new(size_t dim,
                                        const double *entries,
                                        struct PolarizeTensor **out);

/**
 * # Safety
 * `t` must be null or a handle from this library, not used afterwards.
 */
void polarize_tensor_free(struct PolarizeTensor *t);

/**
 * Dimension of a tensor; 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t polarize_tensor_dim(const struct PolarizeTensor *t);

/**
 * Writes the `dim * dim` row-major entries.
 *
 * # Safety
 * `t` must be a live handle and `out` must hold `len` doubles.
 */
enum PolarizeStatus polarize_tensor_entries(const struct PolarizeTensor *t,
                                            double *out,
                                            size_t len);

/**
 * Writes the `dim` eigenvalues in ascending order.
 *
 * # Safety
 * `t` must be a live handle and `out` must hold `len` doubles.
 */
enum PolarizeStatus polarize_tensor_eigenvalues(const struct PolarizeTensor *t,
                                                double *out,
                                                size_t len);

/**
 * Laminate with `rank` unit directions (row-major, `rank * dim` values),
 * lamination weights summing to one, and volume fraction `theta`.
 *
 * # Safety
 * `directions` must hold `rank * dim` doubles, `weights` `rank` doubles.
 */
enum PolarizeStatus polarize_laminate_new(size_t dim,
                                          size_t rank,
                                          const double *directions,
                                          const double *weights,
                                          double theta,
                                          enum PolarizeMatrixPhase matrix,
                                          struct PolarizeLaminate **out);

/**
 * # Safety
 * `l` must be null or a handle from this library, not used afterwards.
 */
void polarize_laminate_free(struct PolarizeLaminate *l);

/**
 * Effective conductivity tensor of a laminate.
 *
 * # Safety
 * `l` must be a live handle and `out` writable.
 */
enum PolarizeStatus polarize_laminate_effective_tensor(const struct PolarizeLaminate *l,
                                                       double gamma0,
                                                       double gamma1,
                                                       struct PolarizeTensor **out);

/**
 * Polarization tensor of a laminate.
 *
 * # Safety
 * `l` must be a live handle and `out` writable.
 */
enum PolarizeStatus polarize_laminate_polarization(const struct PolarizeLaminate *l,
                                                   double gamma0,
                                                   double gamma1,
                                                   struct PolarizeTensor **out);

/**
 * Trace bounds at fraction `theta` in `(0, 1)`: `tr M <= upper` and
 * `tr M^-1 <= lower`.
 *
 * # Safety
 * `upper` and `lower` must be writable.
 */
enum PolarizeStatus polarize_trace_bounds(size_t dim,
                                          double theta,
                                          double gamma0,
                                          double gamma1,
                                          double *upper,
                                          double *lower);

/**
 * Checks `m` against the bounds for `theta`: the zero-volume bounds at 0,
 * the trace bounds in `(0, 1)`, the pointwise bounds at 1. Writes 1 to
 * `all_ok` when every bound holds and the worst slack to `worst_slack`.
 *
 * # Safety
 * `m` must be a live handle; `all_ok` and `worst_slack` writable.
 */
enum PolarizeStatus polarize_check_bounds(const struct PolarizeTensor *m,
                                          double theta,
                                          double gamma0,
                                          double gamma1,
                                          int32_t *all_ok,
                                          double *worst_slack);

/**
 * Cell from a named geometry such as `disk(0.3)` or `random(0.3,7,4)`.
 * `seed` is used only when `has_seed` is nonzero.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` writable.
 */
enum PolarizeStatus polarize_microstructure_named(const char *name,
                                                  size_t dim,
                                                  size_t resolution,
                                                  uint64_t seed,
                                                  int32_t has_seed,
                                                  struct PolarizeMicrostructure **out);

/**
 * Cell from `resolution^dim` indicator bytes, axis 0 fastest; nonzero bytes
 * mark the inclusion phase.
 *
 * # Safety
 * `chi` must hold `resolution^dim` bytes and `out` be writable.
 */
enum PolarizeStatus polarize_microstructure_from_mask(size_t dim,
                                                      size_t resolution,
                                                      const uint8_t *chi,
                                                      struct PolarizeMicrostructure **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void polarize_microstructure_free(struct PolarizeMicrostructure *m);

/**
 * Inclusion volume fraction; NaN for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
double polarize_microstructure_theta(const struct PolarizeMicrostructure *m);

/**
 * Solves the cell problems to relative residual `tol`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PolarizeStatus polarize_homogenize(const struct PolarizeMicrostructure *m,
                                        double gamma0,
                                        double gamma1,
                                        double tol,
                                        struct PolarizeHomogenization **out);

/**
 * # Safety
 * `h` must be null or a handle from this library, not used afterwards.
 */
void polarize_homogenization_free(struct PolarizeHomogenization *h);

/**
 * Effective tensor of a homogenization result.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum PolarizeStatus polarize_homogenization_effective_tensor(const struct PolarizeHomogenization *h,
                                                             struct PolarizeTensor **out);

/**
 * Polarization tensor from the inclusion average of the corrector gradients.
 * Fails for a cell without inclusions.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum PolarizeStatus polarize_homogenization_polarization(const struct PolarizeHomogenization *h,
                                                         struct PolarizeTensor **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLARIZE_H */
