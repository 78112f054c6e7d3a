//! Parabolic cylinder functions `D_p(z)` of real non-positive order.
//!
//! For `p = -r < 0` the function factorises as
//!
//! ```text
//! D_{-r}(ζ) = e^{-ζ²/4} / Γ(r) · A(ζ, r),   A(ζ, r) = ∫₀^∞ e^{-xζ - x²/2} x^{r-1} dx
//! ```
//!
//! Every quantity this crate needs (the function itself, its logarithmic
//! derivatives in ζ and r, and the `A_r`, `A_rr` integrals) is a moment of the
//! normalised kernel `w(x) ∝ e^{-xζ - x²/2} x^{r-1}`:
//!
//! * `∂ζ ln D = -ζ/2 - E[x]`
//! * `∂²ζ ln D = Var[x] - 1/2`
//! * `∂r∂ζ ln D = -Cov(x, ln x)`
//! * `A_r / A = E[ln x]`, `∂r (A_r/A) = Var[ln x]`
//!
//! The kernel is integrated in `u = ln x`, where it is smooth and unimodal for
//! every `r > 0` (the `x^{r-1}` singularity disappears), and is scaled by its
//! peak value so that nothing is formed outside log space.

use crate::error::{domain, Result};
use crate::specfun::gamma::log_gamma;
use crate::specfun::quad::{integrate_vec, tail_bound, QuadConfig};

// Log-integrand drop, relative to the peak, at which the kernel is truncated.
const TAIL_DROP: f64 = 50.0;

/// A real number stored as `sign · exp(log_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub log_abs: f64,
    /// `+1.0` or `-1.0`.
    pub sign: f64,
}

impl SignedLog {
    pub fn from_value(v: f64) -> Self {
        Self { log_abs: v.abs().ln(), sign: if v < 0.0 { -1.0 } else { 1.0 } }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    fn scale(self, c: f64) -> Self {
        Self {
            log_abs: self.log_abs + c.abs().ln(),
            sign: if c < 0.0 { -self.sign } else { self.sign },
        }
    }

    fn add(self, other: Self) -> Self {
        let (hi, lo) = if self.log_abs >= other.log_abs { (self, other) } else { (other, self) };
        if hi.log_abs == f64::NEG_INFINITY {
            return hi;
        }
        let t = hi.sign + lo.sign * (lo.log_abs - hi.log_abs).exp();
        Self { log_abs: hi.log_abs + t.abs().ln(), sign: if t < 0.0 { -1.0 } else { 1.0 } }
    }
}

/// Log-scaled evaluation of a parabolic cylinder function or its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcfEval {
    /// `ln |D|`.
    pub log_abs: f64,
    /// `+1.0` or `-1.0`.
    pub sign: f64,
    /// Order `p` of `D_p`.
    pub order: f64,
    /// Argument `z`.
    pub arg: f64,
}

impl PcfEval {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    fn signed(&self) -> SignedLog {
        SignedLog { log_abs: self.log_abs, sign: self.sign }
    }
}

/// The integrals `A`, `A_r = ∂A/∂r` and `A_rr = ∂²A/∂r²`, log-scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AIntegrals {
    pub a: SignedLog,
    pub a_r: SignedLog,
    pub a_rr: SignedLog,
}

/// All log-derivatives of `D_{-r}(ζ)` used by the likelihood, from one quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcfLogDerivatives {
    /// `ln D_{-r}(ζ)`.
    pub log_d: f64,
    /// `D'_{-r}(ζ) / D_{-r}(ζ)`.
    pub ratio: f64,
    /// `∂/∂ζ` of `ratio`.
    pub ratio_dzeta: f64,
    /// `∂/∂r` of `ratio`.
    pub ratio_dr: f64,
    /// `A_r / A`.
    pub a_ratio: f64,
    /// `∂/∂r (A_r / A)`.
    pub a_ratio_dr: f64,
}

/// Moments of the kernel `w(x) ∝ e^{-xζ - x²/2} x^{r-1}` on `(0, ∞)`.
#[derive(Debug, Clone, Copy)]
struct KernelMoments {
    log_a: f64,
    mean_x: f64,
    var_x: f64,
    mean_ln: f64,
    var_ln: f64,
    cov_x_ln: f64,
}

fn kernel_moments(zeta: f64, r: f64) -> Result<KernelMoments> {
    // Peak of ψ(u) = r·u - ζ·eᵘ - e^{2u}/2 solves y² + ζy - r = 0 with y = eᵘ.
    let disc = (zeta * zeta + 4.0 * r).sqrt();
    let y_peak = if zeta >= 0.0 { 2.0 * r / (zeta + disc) } else { 0.5 * (disc - zeta) };
    let u_peak = y_peak.ln();
    let width = 1.0 / (y_peak * y_peak + r).sqrt();
    let psi_peak = r * u_peak - zeta * y_peak - 0.5 * y_peak * y_peak;
    // ψ(u_peak + t) - ψ(u_peak) with e = expm1(t); using y² + ζy = r at the peak
    // this is r(t - e) - y²e²/2, a sum of non-positive terms.
    let rel = |t: f64| {
        let e = t.exp_m1();
        r * (t - e) - 0.5 * (y_peak * e) * (y_peak * e)
    };
    let t_lo = tail_bound(rel, 0.0, width, TAIL_DROP, -1.0);
    let t_hi = tail_bound(rel, 0.0, width, TAIL_DROP, 1.0);

    let integrand = |t: f64| {
        let w = rel(t).exp();
        let dy = y_peak * t.exp_m1();
        [w, w * dy, w * dy * dy, w * t, w * t * t, w * dy * t]
    };
    let mass = width * (2.0 * std::f64::consts::PI).sqrt();
    let sd_y = y_peak * width;
    let scale = [mass, mass * sd_y, mass * sd_y * sd_y, mass * width, mass * width * width, mass * sd_y * width];
    let cfg = QuadConfig { abs_tol: 0.0, rel_tol: 1e-12, max_subdivisions: 2000 };
    let left = integrate_vec(integrand, t_lo, 0.0, scale, &cfg)?;
    let right = integrate_vec(integrand, 0.0, t_hi, scale, &cfg)?;
    let m: [f64; 6] = std::array::from_fn(|k| left.value[k] + right.value[k]);
    let i0 = m[0];
    let m_dy = m[1] / i0;
    let m_du = m[3] / i0;
    Ok(KernelMoments {
        log_a: psi_peak + i0.ln(),
        mean_x: y_peak + m_dy,
        var_x: (m[2] / i0 - m_dy * m_dy).max(0.0),
        mean_ln: u_peak + m_du,
        var_ln: (m[4] / i0 - m_du * m_du).max(0.0),
        cov_x_ln: m[5] / i0 - m_dy * m_du,
    })
}

fn check_arg(name: &str, z: f64) -> Result<()> {
    if !z.is_finite() {
        return domain(format!("{name} must be finite, got {z}"));
    }
    Ok(())
}

fn check_positive_r(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("r must be positive and finite, got {r}"));
    }
    Ok(())
}

/// `D_p(z)` for real `p ≤ 0`, log-scaled.
pub fn pcf_d(p: f64, z: f64) -> Result<PcfEval> {
    check_arg("z", z)?;
    if !(p <= 0.0) || !p.is_finite() {
        return domain(format!("order p must be finite and <= 0, got {p}"));
    }
    if p == 0.0 {
        return Ok(PcfEval { log_abs: -0.25 * z * z, sign: 1.0, order: p, arg: z });
    }
    let r = -p;
    let m = kernel_moments(z, r)?;
    let log_abs = -0.25 * z * z - log_gamma(r)? + m.log_a;
    Ok(PcfEval { log_abs, sign: 1.0, order: p, arg: z })
}

/// `D'_{-r}(ζ) = -(ζ/2)·D_{-r}(ζ) - r·D_{-r-1}(ζ)` for `r > -1`, log-scaled.
///
/// For `-1 < r < 0` the order `-r` is positive; `D_{-r}` is then obtained
/// from the upward recurrence `D_{-r} = ζ·D_{-r-1} + (1+r)·D_{-r-2}`.
pub fn pcf_d_prime(r: f64, zeta: f64) -> Result<PcfEval> {
    check_arg("zeta", zeta)?;
    if !(r > -1.0) || !r.is_finite() {
        return domain(format!("r must be finite and > -1, got {r}"));
    }
    let order = -r;
    if r > 0.0 {
        let m = kernel_moments(zeta, r)?;
        let log_d = -0.25 * zeta * zeta - log_gamma(r)? + m.log_a;
        let ratio = -0.5 * zeta - m.mean_x;
        let s = SignedLog { log_abs: log_d, sign: 1.0 }.scale(ratio);
        return Ok(PcfEval { log_abs: s.log_abs, sign: s.sign, order, arg: zeta });
    }
    if r == 0.0 {
        let s = SignedLog { log_abs: -0.25 * zeta * zeta, sign: 1.0 }.scale(-0.5 * zeta);
        return Ok(PcfEval { log_abs: s.log_abs, sign: s.sign, order, arg: zeta });
    }
    // D' = -(ζ²/2 + r)·D_{-r-1} - (ζ/2)(1+r)·D_{-r-2}
    let d1 = pcf_d(-r - 1.0, zeta)?.signed();
    let d2 = pcf_d(-r - 2.0, zeta)?.signed();
    let s = d1.scale(-(0.5 * zeta * zeta + r)).add(d2.scale(-0.5 * zeta * (1.0 + r)));
    Ok(PcfEval { log_abs: s.log_abs, sign: s.sign, order, arg: zeta })
}

/// `D'_{-r}(ζ) / D_{-r}(ζ)` for `r > 0`.
pub fn pcf_ratio(r: f64, zeta: f64) -> Result<f64> {
    check_positive_r(r)?;
    check_arg("zeta", zeta)?;
    let m = kernel_moments(zeta, r)?;
    Ok(-0.5 * zeta - m.mean_x)
}

/// `∂/∂ζ [D'_{-r}(ζ) / D_{-r}(ζ)] = (D''D - D'²)/D²`.
pub fn pcf_ratio_dzeta(r: f64, zeta: f64) -> Result<f64> {
    check_positive_r(r)?;
    check_arg("zeta", zeta)?;
    let m = kernel_moments(zeta, r)?;
    Ok(m.var_x - 0.5)
}

/// `∂/∂r [D'_{-r}(ζ) / D_{-r}(ζ)]`.
pub fn pcf_ratio_dr(r: f64, zeta: f64) -> Result<f64> {
    check_positive_r(r)?;
    check_arg("zeta", zeta)?;
    let m = kernel_moments(zeta, r)?;
    Ok(-m.cov_x_ln)
}

/// `A(ζ,r)`, `A_r(ζ,r)` and `A_rr(ζ,r)`.
pub fn a_integrals(r: f64, zeta: f64) -> Result<AIntegrals> {
    check_positive_r(r)?;
    check_arg("zeta", zeta)?;
    let m = kernel_moments(zeta, r)?;
    let a = SignedLog { log_abs: m.log_a, sign: 1.0 };
    Ok(AIntegrals {
        a,
        a_r: a.scale(m.mean_ln),
        a_rr: a.scale(m.var_ln + m.mean_ln * m.mean_ln),
    })
}

/// Every log-derivative of `D_{-r}(ζ)` needed for scores and information.
pub fn pcf_log_derivatives(r: f64, zeta: f64) -> Result<PcfLogDerivatives> {
    check_positive_r(r)?;
    check_arg("zeta", zeta)?;
    let m = kernel_moments(zeta, r)?;
    Ok(PcfLogDerivatives {
        log_d: -0.25 * zeta * zeta - log_gamma(r)? + m.log_a,
        ratio: -0.5 * zeta - m.mean_x,
        ratio_dzeta: m.var_x - 0.5,
        ratio_dr: -m.cov_x_ln,
        a_ratio: m.mean_ln,
        a_ratio_dr: m.var_ln,
    })
}
