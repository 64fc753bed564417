#ifndef PINNBASIS_H
#define PINNBASIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PbStatus {
  PB_STATUS_OK = 0,
  PB_STATUS_NULL_POINTER = 1,
  PB_STATUS_INVALID_ARGUMENT = 2,
  PB_STATUS_IO = 3,
  PB_STATUS_FORMAT = 4,
  PB_STATUS_NUMERICAL = 5,
  PB_STATUS_UNKNOWN_PROBLEM = 6,
  PB_STATUS_PANIC = 7,
} PbStatus;

typedef enum PbDomainKind {
  PB_DOMAIN_KIND_INTERVAL = 0,
  PB_DOMAIN_KIND_BOX = 1,
  PB_DOMAIN_KIND_L_SHAPE = 2,
} PbDomainKind;

/**
 * Opaque orthonormal basis extracted from a network.
 */
typedef struct PbBasis PbBasis;

/**
 * Opaque trained or freshly initialised network.
 */
typedef struct PbNetwork PbNetwork;

/**
 * Interval `(ax, bx)`, box `(ax, bx) x (ay, by)`, or the fixed L-shape
 * (bounds ignored).
 */
typedef struct PbDomain {
  enum PbDomainKind kind;
  double ax;
  double bx;
  double ay;
  double by;
} PbDomain;

typedef struct PbNorms {
  double l2;
  double linf;
} PbNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `pb_*` call on the same thread.
 */
const char *pb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pb_version(void);

/**
 * Glorot-initialised network with layer widths `dims[0..n_dims]`.
 *
 * # Safety
 * `dims` must point to `n_dims` readable values and `out` must be writable.
 */
enum PbStatus pb_network_new(const size_t *dims,
                             size_t n_dims,
                             uint64_t seed,
                             struct PbNetwork **out);

/**
 * Loads a network saved by the library.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PbStatus pb_network_load(const char *path, struct PbNetwork **out);

/**
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum PbStatus pb_network_save(const struct PbNetwork *net, const char *path);

/**
 * Releases a network; null is ignored.
 *
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void pb_network_free(struct PbNetwork *net);

/**
 * Input dimension, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t pb_network_input_dim(const struct PbNetwork *net);

/**
 * Width of the last hidden layer, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t pb_network_n_features(const struct PbNetwork *net);

/**
 * Network output at `n_points` points stored point-major in `x`.
 *
 * # Safety
 * `x` must hold `n_points * input_dim` values and `out` room for `n_points`.
 */
enum PbStatus pb_network_eval(const struct PbNetwork *net,
                              const double *x,
                              size_t n_points,
                              double *out);

/**
 * Trains `net` in place with Adam on a registered stationary problem;
 * zero counts select the library defaults for the problem's domain.
 *
 * # Safety
 * `net` must be a live handle, `problem` a NUL-terminated string and
 * `final_loss` null or writable.
 */
enum PbStatus pb_network_train(struct PbNetwork *net,
                               const char *problem,
                               size_t epochs,
                               double learning_rate,
                               size_t n_collocation,
                               size_t n_boundary,
                               uint64_t seed,
                               double *final_loss);

/**
 * Extracts the orthonormal basis of `net` on a Gauss rule of `order`
 * points per axis and patch.
 *
 * # Safety
 * `net` must be a live handle and `out` writable.
 */
enum PbStatus pb_basis_build(const struct PbNetwork *net,
                             struct PbDomain domain,
                             size_t order,
                             struct PbBasis **out);

/**
 * Releases a basis; null is ignored.
 *
 * # Safety
 * `basis` must be null or a handle not yet freed.
 */
void pb_basis_free(struct PbBasis *basis);

/**
 * Number of retained basis functions, or 0 for a null handle.
 *
 * # Safety
 * `basis` must be null or a live handle.
 */
size_t pb_basis_r_max(const struct PbBasis *basis);

/**
 * Values of the first `count` basis functions at `n_points` points,
 * written row-major (`n_points` rows of `count`).
 *
 * # Safety
 * `x` must hold `n_points * dim` values and `out` room for
 * `n_points * count`.
 */
enum PbStatus pb_basis_eval(const struct PbBasis *basis,
                            const double *x,
                            size_t n_points,
                            size_t count,
                            double *out);

/**
 * Solves a registered stationary problem with the first `r + 1` basis
 * functions; writes `r + 1` coefficients and, when the pointers are
 * non-null, error (if an exact solution is known, else NaN) and residual
 * norms on a rule of `fine_order` points.
 *
 * # Safety
 * `basis` must be a live handle, `problem` a NUL-terminated string,
 * `coefficients` writable for `r + 1` values, `error` and `residual` null
 * or writable.
 */
enum PbStatus pb_poisson_solve(const struct PbBasis *basis,
                               const char *problem,
                               size_t r,
                               double beta,
                               size_t fine_order,
                               double *coefficients,
                               struct PbNorms *error,
                               struct PbNorms *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINNBASIS_H */
