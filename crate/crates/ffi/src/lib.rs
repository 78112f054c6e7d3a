//! C interface to the gamma-normal library.
//!
//! Every function returns a [`GnStatus`]; results come back through out
//! pointers. On failure a message is kept per thread and can be read with
//! [`gn_last_error_message`]. Distributions and fit results are opaque
//! handles that must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gamma_normal::dist::{chi2_quantile, GnParams};
use gamma_normal::mle::{fit, FitResult, FitSpec, Param};
use gamma_normal::specfun::pcf_d;
use gamma_normal::{Dataset, Error};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameters, probability or argument out of range.
    InvalidArgument = 2,
    /// Empty, non-finite or degenerate data.
    InvalidData = 3,
    /// A numerical routine failed to reach its tolerance.
    Numerical = 4,
    /// The fit stopped without converging; the handle is still returned.
    NotConverged = 5,
    /// Output buffer too small.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Bit for α in a free-parameter mask.
pub const GN_PARAM_ALPHA: u32 = 1;
/// Bit for r in a free-parameter mask.
pub const GN_PARAM_R: u32 = 2;
/// Bit for μ in a free-parameter mask.
pub const GN_PARAM_MU: u32 = 4;
/// Bit for σ in a free-parameter mask.
pub const GN_PARAM_SIGMA: u32 = 8;
pub const GN_PARAM_ALL: u32 = 15;

/// Opaque handle to a `GN(α, r, μ, σ²)` law.
pub struct GnDistribution(GnParams);

/// Opaque handle to a maximum-likelihood fit.
pub struct GnFitResult(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GnStatus {
    match e {
        Error::Domain(_) | Error::InvalidParameters(_) | Error::InvalidProbability(_) | Error::MismatchedAlpha(..) => {
            GnStatus::InvalidArgument
        }
        Error::InvalidData(_) | Error::DegenerateData(_) | Error::InvalidFitSpec(_) => GnStatus::InvalidData,
        Error::QuadratureNonConvergence { .. } | Error::Bracketing(_) => GnStatus::Numerical,
    }
}

struct Failure(GnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(GnStatus::NullPointer, format!("{name} is null"))
}

// Runs `f`, recording the message of any error or panic for this thread.
fn guard<F>(f: F) -> GnStatus
where
    F: FnOnce() -> Result<GnStatus, Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GnStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Copies the last error message of the calling thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, or 0 if there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Clears the last error message of the calling thread.
#[no_mangle]
pub extern "C" fn gn_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a distribution handle. `sigma` is the standard deviation.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn gn_distribution_new(
    alpha: f64,
    r: f64,
    mu: f64,
    sigma: f64,
    out: *mut *mut GnDistribution,
) -> GnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = GnParams::new(alpha, r, mu, sigma)?;
        out.write(Box::into_raw(Box::new(GnDistribution(p))));
        Ok(GnStatus::Ok)
    })
}

/// Releases a distribution handle. Null is ignored.
///
/// # Safety
/// `dist` must come from [`gn_distribution_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gn_distribution_free(dist: *mut GnDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Writes `(α, r, μ, σ)` into `out[0..4]`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for four doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_distribution_params(dist: *const GnDistribution, out: *mut f64) -> GnStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(d.0.to_array().as_ptr(), out, 4);
        Ok(GnStatus::Ok)
    })
}

// Shared body of the pointwise evaluators.
unsafe fn scalar<F>(dist: *const GnDistribution, out: *mut f64, f: F) -> GnStatus
where
    F: FnOnce(&GnParams) -> gamma_normal::Result<f64>,
{
    guard(|| {
        let d = handle(dist, "dist")?;
        write(out, "out", f(&d.0)?)?;
        Ok(GnStatus::Ok)
    })
}

/// Density at `z`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_pdf(dist: *const GnDistribution, z: f64, out: *mut f64) -> GnStatus {
    scalar(dist, out, |d| d.pdf(z))
}

/// Log-density at `z`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_log_pdf(dist: *const GnDistribution, z: f64, out: *mut f64) -> GnStatus {
    scalar(dist, out, |d| d.log_pdf(z))
}

/// `P(Z ≤ z)`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_cdf(dist: *const GnDistribution, z: f64, out: *mut f64) -> GnStatus {
    scalar(dist, out, |d| d.cdf(z))
}

/// `P(Z > z)`, accurate in the upper tail.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_sf(dist: *const GnDistribution, z: f64, out: *mut f64) -> GnStatus {
    scalar(dist, out, |d| d.sf(z))
}

/// Inverse CDF at probability `p`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_quantile(dist: *const GnDistribution, p: f64, out: *mut f64) -> GnStatus {
    scalar(dist, out, |d| d.quantile(p))
}

/// Mean, variance and third central moment. Any out pointer may be null.
///
/// # Safety
/// `dist` must be a live handle; non-null outs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gn_moments(
    dist: *const GnDistribution,
    mean: *mut f64,
    variance: *mut f64,
    third_central: *mut f64,
) -> GnStatus {
    guard(|| {
        let m = handle(dist, "dist")?.0.moments();
        for (p, v) in [(mean, m.mean), (variance, m.variance), (third_central, m.third_central)] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(GnStatus::Ok)
    })
}

/// Fills `out[0..n]` with draws, reproducible for a given `seed`.
///
/// # Safety
/// `dist` must be a live handle and `out` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_sample(dist: *const GnDistribution, n: usize, seed: u64, out: *mut f64) -> GnStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = d.0.sample(n, seed)?;
        ptr::copy_nonoverlapping(data.values().as_ptr(), out, n);
        Ok(GnStatus::Ok)
    })
}

/// Parabolic cylinder function `D_p(z)` for `p ≤ 0`, as `sign·exp(log_abs)`.
///
/// # Safety
/// `log_abs` and `sign` must be valid for one double each.
#[no_mangle]
pub unsafe extern "C" fn gn_pcf_d(p: f64, z: f64, log_abs: *mut f64, sign: *mut f64) -> GnStatus {
    guard(|| {
        if log_abs.is_null() || sign.is_null() {
            return Err(null("output"));
        }
        let v = pcf_d(p, z)?;
        log_abs.write(v.log_abs);
        sign.write(v.sign);
        Ok(GnStatus::Ok)
    })
}

/// Chi-squared quantile with `nu` degrees of freedom.
///
/// # Safety
/// `out` must be valid for one double.
#[no_mangle]
pub unsafe extern "C" fn gn_chi2_quantile(nu: f64, p: f64, out: *mut f64) -> GnStatus {
    guard(|| {
        write(out, "out", chi2_quantile(nu, p)?)?;
        Ok(GnStatus::Ok)
    })
}

/// Maximum-likelihood fit of `values[0..n]`.
///
/// `free_mask` is a combination of the `GN_PARAM_*` bits. Parameters outside
/// the mask are held at the matching entry of `fixed` (`α, r, μ, σ` order),
/// which may be null only when every parameter is free. On
/// [`GnStatus::NotConverged`] the handle is still written so the last
/// iterate and its diagnostics can be inspected.
///
/// # Safety
/// `values` must be valid for `n` doubles, `fixed` null or valid for four,
/// and `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn gn_fit(
    values: *const f64,
    n: usize,
    free_mask: u32,
    fixed: *const f64,
    out: *mut *mut GnFitResult,
) -> GnStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if free_mask & !GN_PARAM_ALL != 0 {
            return Err(Failure(GnStatus::InvalidArgument, format!("unknown bits in free mask {free_mask:#x}")));
        }
        let data = Dataset::new(std::slice::from_raw_parts(values, n).to_vec())?;
        let mut spec = FitSpec::new(data)?;
        for p in Param::ALL {
            if free_mask & (1 << p.index()) == 0 {
                if fixed.is_null() {
                    return Err(null("fixed"));
                }
                spec = spec.fix(p, *fixed.add(p.index()))?;
            }
        }
        let res = fit(&spec)?;
        let converged = res.converged;
        out.write(Box::into_raw(Box::new(GnFitResult(res))));
        Ok(if converged { GnStatus::Ok } else { GnStatus::NotConverged })
    })
}

/// Releases a fit handle. Null is ignored.
///
/// # Safety
/// `res` must come from [`gn_fit`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_free(res: *mut GnFitResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Estimated `(α, r, μ, σ)`; fixed parameters echo their fixed value.
///
/// # Safety
/// `res` must be a live handle and `out` valid for four doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_params(res: *const GnFitResult, out: *mut f64) -> GnStatus {
    guard(|| {
        let r = handle(res, "res")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(r.0.theta_hat.to_array().as_ptr(), out, 4);
        Ok(GnStatus::Ok)
    })
}

/// Standard errors in `(α, r, μ, σ)` order; NaN for fixed parameters or
/// where the covariance is unavailable.
///
/// # Safety
/// `res` must be a live handle and `out` valid for four doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_standard_errors(res: *const GnFitResult, out: *mut f64) -> GnStatus {
    guard(|| {
        let r = handle(res, "res")?;
        if out.is_null() {
            return Err(null("out"));
        }
        for (i, se) in r.0.standard_errors().into_iter().enumerate() {
            out.add(i).write(se.unwrap_or(f64::NAN));
        }
        Ok(GnStatus::Ok)
    })
}

/// Number of free parameters `k`; matrices below are `k × k`.
///
/// # Safety
/// `res` must be null or a live handle. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_num_free(res: *const GnFitResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.free_params().len())
}

/// Free-parameter mask of the fit, as `GN_PARAM_*` bits.
///
/// # Safety
/// `res` must be null or a live handle. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_free_mask(res: *const GnFitResult) -> u32 {
    res.as_ref().map_or(0, |r| r.0.free_params().iter().map(|p| 1u32 << p.index()).sum())
}

// Copies `values` into a caller buffer of `len` doubles.
unsafe fn write_slice(values: &[f64], out: *mut f64, len: usize) -> Result<GnStatus, Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < values.len() {
        return Err(Failure(GnStatus::BufferTooSmall, format!("need {} doubles, got {len}", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(GnStatus::Ok)
}

/// Row-major covariance of the free parameters into `out[0..k*k]`.
/// Returns [`GnStatus::Numerical`] when the information is singular.
///
/// # Safety
/// `res` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_covariance(res: *const GnFitResult, out: *mut f64, len: usize) -> GnStatus {
    guard(|| {
        let r = handle(res, "res")?;
        match &r.0.covariance {
            Some(c) => write_slice(c.transpose().as_slice(), out, len),
            None => Err(Failure(GnStatus::Numerical, "observed information is singular".into())),
        }
    })
}

/// Row-major observed information of the free parameters into `out[0..k*k]`.
///
/// # Safety
/// `res` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_observed_info(res: *const GnFitResult, out: *mut f64, len: usize) -> GnStatus {
    guard(|| write_slice(handle(res, "res")?.0.observed_info.transpose().as_slice(), out, len))
}

/// Ascending eigenvalues of the observed information into `out[0..k]`.
///
/// # Safety
/// `res` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_eigenvalues(res: *const GnFitResult, out: *mut f64, len: usize) -> GnStatus {
    guard(|| {
        let r = handle(res, "res")?;
        write_slice(&r.0.eigenvalues, out, len)
    })
}

/// Summary scalars of a fit. Any out pointer may be null.
///
/// # Safety
/// `res` must be a live handle; non-null outs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gn_fit_result_summary(
    res: *const GnFitResult,
    log_likelihood: *mut f64,
    determinant: *mut f64,
    converged: *mut bool,
    positive_definite: *mut bool,
    iterations: *mut usize,
) -> GnStatus {
    guard(|| {
        let r = &handle(res, "res")?.0;
        if !log_likelihood.is_null() {
            log_likelihood.write(r.log_likelihood);
        }
        if !determinant.is_null() {
            determinant.write(r.determinant);
        }
        if !converged.is_null() {
            converged.write(r.converged);
        }
        if !positive_definite.is_null() {
            positive_definite.write(r.positive_definite);
        }
        if !iterations.is_null() {
            iterations.write(r.iterations);
        }
        Ok(GnStatus::Ok)
    })
}
