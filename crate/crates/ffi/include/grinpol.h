#ifndef GRINPOL_H
#define GRINPOL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_NULL_POINTER = 1,
  GP_STATUS_INVALID_ARGUMENT = 2,
  GP_STATUS_SINGULAR_PROPAGATION = 3,
  GP_STATUS_INVALID_STATE = 4,
  GP_STATUS_INCOMPLETE_SET = 5,
  GP_STATUS_CONVERGENCE = 6,
  GP_STATUS_FIT = 7,
  GP_STATUS_PARSE = 8,
  GP_STATUS_SCHEMA = 9,
  GP_STATUS_IO = 10,
  GP_STATUS_PANIC = 11,
} GpStatus;

/**
 * The four Bell states.
 */
typedef enum GpBell {
  GP_BELL_PHI_PLUS = 0,
  GP_BELL_PHI_MINUS = 1,
  GP_BELL_PSI_PLUS = 2,
  GP_BELL_PSI_MINUS = 3,
} GpBell;

/**
 * Opaque set of tomography count records.
 */
typedef struct GpCountSet GpCountSet;

/**
 * Opaque two-qubit density matrix.
 */
typedef struct GpDensityMatrix GpDensityMatrix;

/**
 * Summary of a fringe fit.
 */
typedef struct GpSinusoidFit {
  double offset;
  double amplitude;
  double period;
  double phase;
  double visibility;
  double visibility_std;
  double residual_norm;
} GpSinusoidFit;

/**
 * Summary of a profile fit.
 */
typedef struct GpGaussianFit {
  double baseline;
  double amplitude;
  double center;
  double sigma;
  double fwhm;
  double fwhm_std;
  double residual_norm;
} GpGaussianFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or an empty string.
 * The pointer stays valid until the next `gp_*` call on the same thread.
 */
const char *gp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Equivalent focal length `1/(n0 g)` of a GRIN rod.
 *
 * # Safety
 * `out_f` must be NULL or point to writable memory for one `double`.
 */
enum GpStatus gp_focal_length(double n0, double g, double *out_f);

/**
 * Coupled waist `lambda f / (pi W0)`.
 *
 * # Safety
 * `out_waist` must be NULL or writable.
 */
enum GpStatus gp_coupled_waist(double wavelength,
                               double fiber_waist,
                               double focal_length,
                               double *out_waist);

/**
 * Confocal parameter `pi W^2 / lambda`.
 *
 * # Safety
 * `out_z` must be NULL or writable.
 */
enum GpStatus gp_confocal_parameter(double waist, double wavelength, double *out_z);

/**
 * Lateral-offset coupling between two waists; 0 for non-positive waists.
 */
double gp_coupling_efficiency_lateral(double waist_a, double waist_b, double offset);

/**
 * FWHM of the lateral-offset coupling curve.
 */
double gp_lateral_fwhm(double waist_a, double waist_b);

/**
 * Pure Bell-state density matrix.
 *
 * # Safety
 * `out_rho` must be NULL or writable.
 */
enum GpStatus gp_density_bell(enum GpBell kind, struct GpDensityMatrix **out_rho);

/**
 * Density matrix from 16 real and 16 imaginary parts (row-major). The
 * matrix must be Hermitian, unit-trace and positive semidefinite.
 *
 * # Safety
 * `re` and `im` must point to 16 doubles each; `out_rho` must be writable.
 */
enum GpStatus gp_density_from_parts(const double *re,
                                    const double *im,
                                    struct GpDensityMatrix **out_rho);

/**
 * Copy a matrix out as 16 real and 16 imaginary parts (row-major).
 *
 * # Safety
 * `rho` must be a live handle; `re` and `im` must have room for 16 doubles.
 */
enum GpStatus gp_density_parts(const struct GpDensityMatrix *rho, double *re, double *im);

/**
 * # Safety
 * `rho` must be NULL or a handle not yet freed.
 */
void gp_density_free(struct GpDensityMatrix *rho);

/**
 * Fidelity `<B|rho|B>` with a Bell state.
 *
 * # Safety
 * `rho` must be a live handle; `out_f` must be writable.
 */
enum GpStatus gp_fidelity_bell(const struct GpDensityMatrix *rho, enum GpBell kind, double *out_f);

/**
 * Wootters concurrence.
 *
 * # Safety
 * `rho` must be a live handle; `out_c` must be writable.
 */
enum GpStatus gp_concurrence(const struct GpDensityMatrix *rho, double *out_c);

/**
 * Tangle, the squared concurrence.
 *
 * # Safety
 * `rho` must be a live handle; `out_t` must be writable.
 */
enum GpStatus gp_tangle(const struct GpDensityMatrix *rho, double *out_t);

/**
 * Purity `tr(rho^2)`.
 *
 * # Safety
 * `rho` must be a live handle; `out_p` must be writable.
 */
enum GpStatus gp_purity(const struct GpDensityMatrix *rho, double *out_p);

/**
 * Poisson counts of the 16 standard settings around `mean_total * tr(P rho)`.
 *
 * # Safety
 * `rho` must be a live handle; `out_counts` must be writable.
 */
enum GpStatus gp_counts_simulate(const struct GpDensityMatrix *rho,
                                 double mean_total,
                                 uint64_t seed,
                                 struct GpCountSet **out_counts);

/**
 * Parse a count CSV (`setting_label,coincidences,singles_1,singles_2,duration_s`).
 *
 * # Safety
 * `csv_text` must be a NUL-terminated string; `out_counts` must be writable.
 */
enum GpStatus gp_counts_from_csv(const char *csv_text, struct GpCountSet **out_counts);

/**
 * Number of records in a count set (0 for NULL).
 *
 * # Safety
 * `counts` must be NULL or a live handle.
 */
size_t gp_counts_len(const struct GpCountSet *counts);

/**
 * Coincidences of record `index`.
 *
 * # Safety
 * `counts_set` must be a live handle; `out_n` must be writable.
 */
enum GpStatus gp_counts_coincidences(const struct GpCountSet *counts_set,
                                     size_t index,
                                     uint64_t *out_n);

/**
 * # Safety
 * `counts` must be NULL or a handle not yet freed.
 */
void gp_counts_free(struct GpCountSet *counts);

/**
 * Maximum-likelihood reconstruction from the linear-inversion start.
 * Pass 0 for `max_iterations` or `gradient_tolerance` to use the defaults
 * (500 and 1e-9). On `GP_STATUS_CONVERGENCE` no matrix is returned.
 *
 * # Safety
 * `counts_set` must be a live handle; `out_rho` must be writable;
 * `out_iterations` may be NULL.
 */
enum GpStatus gp_mle_reconstruct(const struct GpCountSet *counts_set,
                                 size_t max_iterations,
                                 double gradient_tolerance,
                                 struct GpDensityMatrix **out_rho,
                                 size_t *out_iterations);

/**
 * Fit `offset (1 + V cos(2 pi x / period + phase))` to `n` points.
 * `weights` may be NULL for an unweighted fit.
 *
 * # Safety
 * `xs`, `ys` (and `weights` when non-NULL) must hold `n` doubles;
 * `out_fit` must be writable.
 */
enum GpStatus gp_fit_sinusoid(const double *xs,
                              const double *ys,
                              const double *weights,
                              size_t n,
                              struct GpSinusoidFit *out_fit);

/**
 * Fit `baseline + A exp(-(x - center)^2 / (2 sigma^2))` to `n` points.
 *
 * # Safety
 * As for [`gp_fit_sinusoid`].
 */
enum GpStatus gp_fit_gaussian(const double *xs,
                              const double *ys,
                              const double *weights,
                              size_t n,
                              struct GpGaussianFit *out_fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRINPOL_H */
