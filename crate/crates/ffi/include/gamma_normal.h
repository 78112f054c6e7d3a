#ifndef GAMMA_NORMAL_H
#define GAMMA_NORMAL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Bit for α in a free-parameter mask.
 */
#define GN_PARAM_ALPHA 1

/*
 Bit for r in a free-parameter mask.
 */
#define GN_PARAM_R 2

/*
 Bit for μ in a free-parameter mask.
 */
#define GN_PARAM_MU 4

/*
 Bit for σ in a free-parameter mask.
 */
#define GN_PARAM_SIGMA 8

#define GN_PARAM_ALL 15

/*
 Outcome of a call.
 */
typedef enum GnStatus {
  GN_STATUS_OK = 0,
  GN_STATUS_NULL_POINTER = 1,
  /*
   Parameters, probability or argument out of range.
   */
  GN_STATUS_INVALID_ARGUMENT = 2,
  /*
   Empty, non-finite or degenerate data.
   */
  GN_STATUS_INVALID_DATA = 3,
  /*
   A numerical routine failed to reach its tolerance.
   */
  GN_STATUS_NUMERICAL = 4,
  /*
   The fit stopped without converging; the handle is still returned.
   */
  GN_STATUS_NOT_CONVERGED = 5,
  /*
   Output buffer too small.
   */
  GN_STATUS_BUFFER_TOO_SMALL = 6,
  GN_STATUS_PANIC = 7,
} GnStatus;

/*
 Opaque handle to a `GN(α, r, μ, σ²)` law.
 */
typedef struct GnDistribution GnDistribution;

/*
 Opaque handle to a maximum-likelihood fit.
 */
typedef struct GnFitResult GnFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of the calling thread into `buf`
 (NUL-terminated, truncated to `len`). Returns the full message length
 excluding the terminator, or 0 if there is no message.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
size_t gn_last_error_message(char *buf, size_t len);

/*
 Clears the last error message of the calling thread.
 */
void gn_clear_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gn_version(void);

/*
 Creates a distribution handle. `sigma` is the standard deviation.

 # Safety
 `out` must be valid for writing a pointer.
 */
enum GnStatus gn_distribution_new(double alpha,
                                  double r,
                                  double mu,
                                  double sigma,
                                  struct GnDistribution **out);

/*
 Releases a distribution handle. Null is ignored.

 # Safety
 `dist` must come from [`gn_distribution_new`] and not be freed twice.
 */
void gn_distribution_free(struct GnDistribution *dist);

/*
 Writes `(α, r, μ, σ)` into `out[0..4]`.

 # Safety
 `dist` must be a live handle and `out` valid for four doubles.
 */
enum GnStatus gn_distribution_params(const struct GnDistribution *dist, double *out);

/*
 Density at `z`.

 # Safety
 `dist` must be a live handle and `out` valid for one double.
 */
enum GnStatus gn_pdf(const struct GnDistribution *dist, double z, double *out);

/*
 Log-density at `z`.

 # Safety
 `dist` must be a live handle and `out` valid for one double.
 */
enum GnStatus gn_log_pdf(const struct GnDistribution *dist, double z, double *out);

/*
 `P(Z ≤ z)`.

 # Safety
 `dist` must be a live handle and `out` valid for one double.
 */
enum GnStatus gn_cdf(const struct GnDistribution *dist, double z, double *out);

/*
 `P(Z > z)`, accurate in the upper tail.

 # Safety
 `dist` must be a live handle and `out` valid for one double.
 */
enum GnStatus gn_sf(const struct GnDistribution *dist, double z, double *out);

/*
 Inverse CDF at probability `p`.

 # Safety
 `dist` must be a live handle and `out` valid for one double.
 */
enum GnStatus gn_quantile(const struct GnDistribution *dist, double p, double *out);

/*
 Mean, variance and third central moment. Any out pointer may be null.

 # Safety
 `dist` must be a live handle; non-null outs must be valid.
 */
enum GnStatus gn_moments(const struct GnDistribution *dist,
                         double *mean,
                         double *variance,
                         double *third_central);

/*
 Fills `out[0..n]` with draws, reproducible for a given `seed`.

 # Safety
 `dist` must be a live handle and `out` valid for `n` doubles.
 */
enum GnStatus gn_sample(const struct GnDistribution *dist, size_t n, uint64_t seed, double *out);

/*
 Parabolic cylinder function `D_p(z)` for `p ≤ 0`, as `sign·exp(log_abs)`.

 # Safety
 `log_abs` and `sign` must be valid for one double each.
 */
enum GnStatus gn_pcf_d(double p, double z, double *log_abs, double *sign);

/*
 Chi-squared quantile with `nu` degrees of freedom.

 # Safety
 `out` must be valid for one double.
 */
enum GnStatus gn_chi2_quantile(double nu, double p, double *out);

/*
 Maximum-likelihood fit of `values[0..n]`.

 `free_mask` is a combination of the `GN_PARAM_*` bits. Parameters outside
 the mask are held at the matching entry of `fixed` (`α, r, μ, σ` order),
 which may be null only when every parameter is free. On
 [`GnStatus::NotConverged`] the handle is still written so the last
 iterate and its diagnostics can be inspected.

 # Safety
 `values` must be valid for `n` doubles, `fixed` null or valid for four,
 and `out` valid for writing a pointer.
 */
enum GnStatus gn_fit(const double *values,
                     size_t n,
                     uint32_t free_mask,
                     const double *fixed,
                     struct GnFitResult **out);

/*
 Releases a fit handle. Null is ignored.

 # Safety
 `res` must come from [`gn_fit`] and not be freed twice.
 */
void gn_fit_result_free(struct GnFitResult *res);

/*
 Estimated `(α, r, μ, σ)`; fixed parameters echo their fixed value.

 # Safety
 `res` must be a live handle and `out` valid for four doubles.
 */
enum GnStatus gn_fit_result_params(const struct GnFitResult *res, double *out);

/*
 Standard errors in `(α, r, μ, σ)` order; NaN for fixed parameters or
 where the covariance is unavailable.

 # Safety
 `res` must be a live handle and `out` valid for four doubles.
 */
enum GnStatus gn_fit_result_standard_errors(const struct GnFitResult *res, double *out);

/*
 Number of free parameters `k`; matrices below are `k × k`.

 # Safety
 `res` must be null or a live handle. Returns 0 for null.
 */
size_t gn_fit_result_num_free(const struct GnFitResult *res);

/*
 Free-parameter mask of the fit, as `GN_PARAM_*` bits.

 # Safety
 `res` must be null or a live handle. Returns 0 for null.
 */
uint32_t gn_fit_result_free_mask(const struct GnFitResult *res);

/*
 Row-major covariance of the free parameters into `out[0..k*k]`.
 Returns [`GnStatus::Numerical`] when the information is singular.

 # Safety
 `res` must be a live handle and `out` valid for `len` doubles.
 */
enum GnStatus gn_fit_result_covariance(const struct GnFitResult *res, double *out, size_t len);

/*
 Row-major observed information of the free parameters into `out[0..k*k]`.

 # Safety
 `res` must be a live handle and `out` valid for `len` doubles.
 */
enum GnStatus gn_fit_result_observed_info(const struct GnFitResult *res, double *out, size_t len);

/*
 Ascending eigenvalues of the observed information into `out[0..k]`.

 # Safety
 `res` must be a live handle and `out` valid for `len` doubles.
 */
enum GnStatus gn_fit_result_eigenvalues(const struct GnFitResult *res, double *out, size_t len);

/*
 Summary scalars of a fit. Any out pointer may be null.

 # Safety
 `res` must be a live handle; non-null outs must be valid.
 */
enum GnStatus gn_fit_result_summary(const struct GnFitResult *res,
                                    double *log_likelihood,
                                    double *determinant,
                                    bool *converged,
                                    bool *positive_definite,
                                    size_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMMA_NORMAL_H */
