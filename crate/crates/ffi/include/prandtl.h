/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PRANDTL_H
#define PRANDTL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrandtlStatus {
  PRANDTL_STATUS_OK = 0,
  PRANDTL_STATUS_NULL_POINTER = 1,
  PRANDTL_STATUS_INVALID_ARGUMENT = 2,
  PRANDTL_STATUS_INVALID_GEOMETRY = 3,
  PRANDTL_STATUS_PARABOLICITY = 4,
  PRANDTL_STATUS_COMPATIBILITY = 5,
  PRANDTL_STATUS_STAGNANT_LAYER = 6,
  PRANDTL_STATUS_NOT_CONVERGED = 7,
  PRANDTL_STATUS_ORACLE_FAILURE = 8,
  PRANDTL_STATUS_IO = 9,
  PRANDTL_STATUS_BUFFER_TOO_SMALL = 10,
  PRANDTL_STATUS_PANIC = 11,
  PRANDTL_STATUS_INTERNAL = 12,
} PrandtlStatus;

/*
 Boundary data: arc-length grid and Euler slip `q_e`.
 */
typedef struct PrandtlGeometry PrandtlGeometry;

/*
 A converged boundary layer.
 */
typedef struct PrandtlSolution PrandtlSolution;

/*
 Solver settings; obtain defaults from [`prandtl_options_default`].
 */
typedef struct PrandtlOptions {
  size_t n_psi;
  double psi_max;
  double tol;
  size_t max_iter;
  double compat_tol;
} PrandtlOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *prandtl_last_error_message(void);

/*
 Static name of a status code.
 */
const char *prandtl_status_name(enum PrandtlStatus status);

enum PrandtlStatus prandtl_geometry_disk(double radius, size_t n_s, struct PrandtlGeometry **out);

/*
 Ellipse with semi-axes `a` and 1.
 */
enum PrandtlStatus prandtl_geometry_ellipse(double a, size_t n_s, struct PrandtlGeometry **out);

/*
 Tabulated slip on `n` equally spaced arc lengths of a boundary of length `length`.

 # Safety
 `q_e` must point to `n` readable doubles.
 */
enum PrandtlStatus prandtl_geometry_custom(double length,
                                           const double *q_e,
                                           size_t n,
                                           struct PrandtlGeometry **out);

/*
 # Safety
 `geometry` must come from a `prandtl_geometry_*` constructor and not be
 freed twice. Null is ignored.
 */
void prandtl_geometry_free(struct PrandtlGeometry *geometry);

/*
 Number of arc-length samples, or 0 for null.

 # Safety
 `geometry` must be null or a live handle.
 */
size_t prandtl_geometry_n_s(const struct PrandtlGeometry *geometry);

/*
 Boundary length, or NaN for null.

 # Safety
 `geometry` must be null or a live handle.
 */
double prandtl_geometry_length(const struct PrandtlGeometry *geometry);

/*
 Copies `q_e` into `out` (capacity `len`).

 # Safety
 `geometry` must be a live handle and `out` must point to `len` writable doubles.
 */
enum PrandtlStatus prandtl_geometry_q_e(const struct PrandtlGeometry *geometry,
                                        double *out,
                                        size_t len);

struct PrandtlOptions prandtl_options_default(void);

/*
 Solves for the boundary layer with slip `q_e + epsilon g`, `g` sampled on
 the geometry's arc-length grid (`n_g` must equal its `n_s`).

 # Safety
 `geometry` must be a live handle, `g` must point to `n_g` doubles, and
 `options` must be null (defaults) or valid.
 */
enum PrandtlStatus prandtl_solve(const struct PrandtlGeometry *geometry,
                                 double epsilon,
                                 const double *g,
                                 size_t n_g,
                                 const struct PrandtlOptions *options,
                                 struct PrandtlSolution **out);

/*
 # Safety
 `solution` must come from [`prandtl_solve`] and not be freed twice. Null is ignored.
 */
void prandtl_solution_free(struct PrandtlSolution *solution);

/*
 Selected vorticity, or NaN for null.

 # Safety
 `solution` must be null or a live handle.
 */
double prandtl_solution_omega0(const struct PrandtlSolution *solution);

/*
 Leading-order and nonlinear parts of `omega_bar`, with
 `1 - omega0^2 = epsilon (star + err)`.

 # Safety
 `solution` must be a live handle; `star` and `err` must be writable.
 */
enum PrandtlStatus prandtl_solution_omega_bar(const struct PrandtlSolution *solution,
                                              double *star,
                                              double *err);

/*
 Number of Picard iterations, or 0 for null.

 # Safety
 `solution` must be null or a live handle.
 */
size_t prandtl_solution_iterations(const struct PrandtlSolution *solution);

/*
 Field dimensions `(n_s, n_psi)`.

 # Safety
 `solution` must be a live handle; `n_s` and `n_psi` must be writable.
 */
enum PrandtlStatus prandtl_solution_shape(const struct PrandtlSolution *solution,
                                          size_t *n_s,
                                          size_t *n_psi);

/*
 Copies `Q` row-major by s into `out` (capacity `len`).

 # Safety
 `solution` must be a live handle and `out` must point to `len` writable doubles.
 */
enum PrandtlStatus prandtl_solution_field(const struct PrandtlSolution *solution,
                                          double *out,
                                          size_t len);

/*
 Closed-form disk vorticity `sqrt(mean f^2) / (R / 2)` for slip samples `f`.
 NaN on null or empty input.

 # Safety
 `f` must point to `n` readable doubles.
 */
double prandtl_wood_disk(const double *f, size_t n, double radius);

/*
 Leading-order vorticity `sqrt(int q_e f^2 / int q_e^3)` on `geometry`.

 # Safety
 `geometry` must be a live handle, `f` must point to `n` readable doubles
 and `out` must be writable.
 */
enum PrandtlStatus prandtl_fl_leading(const struct PrandtlGeometry *geometry,
                                      const double *f,
                                      size_t n,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRANDTL_H */
