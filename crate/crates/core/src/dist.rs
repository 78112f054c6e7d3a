//! The gamma–normal distribution and its exponential–normal and
//! overdispersed chi-squared special cases.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::specfun::quad::{integrate, tail_bound, QuadConfig};
use crate::specfun::{ln_erfc, log_gamma, norm_cdf, norm_sf, pcf_d};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameters(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameters(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// Parameters of `GN(α, r, μ, σ²)`: gamma rate `α`, gamma shape `r`, normal
/// mean `μ` and normal standard deviation `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnParams {
    alpha: f64,
    r: f64,
    mu: f64,
    sigma: f64,
}

/// First three central moments of a gamma–normal variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
}

impl Moments {
    /// Standardised skewness `μ₃ / σ³`.
    pub fn skewness(&self) -> f64 {
        self.third_central / self.variance.powf(1.5)
    }
}

impl GnParams {
    pub fn new(alpha: f64, r: f64, mu: f64, sigma: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("r", r)?;
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { alpha, r, mu, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Degrees of freedom `ν = 2r` of the chi-squared view.
    pub fn nu(&self) -> f64 {
        2.0 * self.r
    }

    /// The same law translated to mean parameter `mu`.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.alpha, self.r, mu, self.sigma)
    }

    /// Parameter vector `(α, r, μ, σ)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.r, self.mu, self.sigma]
    }

    pub fn from_array(theta: [f64; 4]) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2], theta[3])
    }

    /// Argument `ζ = ασ + (μ - z)/σ` of the parabolic cylinder function.
    pub fn zeta(&self, z: f64) -> f64 {
        self.alpha * self.sigma + (self.mu - z) / self.sigma
    }

    /// `ln E(z) = ζ²/4 - (z - μ)²/(2σ²)`, expanded so no large terms cancel.
    pub fn log_e(&self, z: f64) -> f64 {
        let d = z - self.mu;
        let a = self.alpha;
        let s = self.sigma;
        0.25 * a * a * s * s - 0.5 * a * d - 0.25 * d * d / (s * s)
    }

    /// Combines `ln D_{-r}(ζ)` with the elementary factors of the density.
    pub(crate) fn log_pdf_from_log_d(&self, z: f64, log_d: f64) -> f64 {
        self.r * (self.alpha * self.sigma).ln() - LN_SQRT_2PI - self.sigma.ln() + log_d + self.log_e(z)
    }

    pub fn log_pdf(&self, z: f64) -> Result<f64> {
        check_finite("z", z)?;
        let d = pcf_d(-self.r, self.zeta(z))?;
        Ok(self.log_pdf_from_log_d(z, d.log_abs))
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        Ok(self.log_pdf(z)?.exp())
    }

    /// `P(Z ≤ z)`.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        self.mixture_tail(z, false)
    }

    /// `P(Z > z)`, computed directly rather than as `1 - cdf`.
    pub fn sf(&self, z: f64) -> Result<f64> {
        self.mixture_tail(z, true)
    }

    // Conditions on the gamma component: with t = e^u ~ Gamma(r, 1),
    //   P(Z ≤ z) = ∫ g(u) Φ((z - μ - t/α)/σ) du,   g(u) = exp(r·u - e^u - ln Γ(r)).
    // The integrand is smooth in u; the normal factor steps near t = α(z - μ).
    fn mixture_tail(&self, z: f64, upper: bool) -> Result<f64> {
        if z.is_nan() {
            return Err(Error::Domain("z is NaN".into()));
        }
        if z == f64::INFINITY {
            return Ok(if upper { 0.0 } else { 1.0 });
        }
        if z == f64::NEG_INFINITY {
            return Ok(if upper { 1.0 } else { 0.0 });
        }
        let (alpha, mu, sigma) = (self.alpha, self.mu, self.sigma);
        let integrand = |u: f64| {
            let t = (z - mu - u.exp() / alpha) / sigma;
            if upper {
                norm_sf(t)
            } else {
                norm_cdf(t)
            }
        };
        let split = if z > mu { Some((alpha * (z - mu)).ln()) } else { None };
        gamma_mixture(self.r, integrand, split)
    }

    /// Inverse CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let (m, sd) = self.normal_approx();
        // Work with whichever tail keeps the target probability small.
        if p > 0.5 {
            invert_increasing(|z| Ok((1.0 - p) - self.sf(z)?), m, sd)
        } else {
            invert_increasing(|z| Ok(self.cdf(z)? - p), m, sd)
        }
    }

    pub fn moments(&self) -> Moments {
        let a = self.alpha;
        Moments {
            mean: self.mu + self.r / a,
            variance: self.sigma2() + self.r / (a * a),
            third_central: 2.0 * self.r / (a * a * a),
        }
    }

    /// Mean and standard deviation of the normal law that `GN` approaches for large `r/α`.
    pub fn normal_approx(&self) -> (f64, f64) {
        let m = self.moments();
        (m.mean, m.variance.sqrt())
    }

    /// Law of the sum of independent `GN(α, r₁, μ₁, σ₁²)` and `GN(α, r₂, μ₂, σ₂²)`.
    pub fn convolve(&self, other: &GnParams) -> Result<GnParams> {
        if self.alpha != other.alpha {
            return Err(Error::MismatchedAlpha(self.alpha, other.alpha));
        }
        Self::new(self.alpha, self.r + other.r, self.mu + other.mu, self.sigma.hypot(other.sigma))
    }

    /// `n` independent draws of `X + Y`, reproducible for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidData("sample size must be at least 1".into()));
        }
        Dataset::new(self.sample_values(n, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Draws from a caller-owned generator.
    pub fn sample_values<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let gamma = Gamma::new(self.r, 1.0 / self.alpha).expect("validated shape and scale");
        let normal = Normal::new(self.mu, self.sigma).expect("validated standard deviation");
        (0..n).map(|_| gamma.sample(rng) + normal.sample(rng)).collect()
    }
}

/// `∫ exp(r·u - e^u - ln Γ(r))·h(u) du` over the real line for `0 ≤ h ≤ 1`,
/// optionally split at an interior point where `h` changes quickly.
fn gamma_mixture<F: Fn(f64) -> f64>(r: f64, h: F, split: Option<f64>) -> Result<f64> {
    let lg = log_gamma(r)?;
    let log_g = |u: f64| r * u - u.exp() - lg;
    let peak = r.ln();
    let width = 1.0 / r.sqrt();
    let lo = tail_bound(log_g, peak, width, 50.0, -1.0);
    let hi = tail_bound(log_g, peak, width, 50.0, 1.0);
    let mut cuts = vec![lo, peak, hi];
    if let Some(s) = split.filter(|s| *s > lo && *s < hi) {
        cuts.push(s);
    }
    cuts.sort_by(f64::total_cmp);
    let cfg = QuadConfig { abs_tol: 1e-15, rel_tol: 1e-12, max_subdivisions: 2000 };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(|u| log_g(u).exp() * h(u), w[0], w[1], &cfg)?.0;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Root of a nondecreasing function, bracketed outward from `center ± 10·scale`,
/// bisected to `1e-6·scale` and then polished by Illinois regula falsi.
fn invert_increasing<F>(h: F, center: f64, scale: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut lo = center - 10.0 * scale;
    let mut hi = center + 10.0 * scale;
    let mut h_lo = h(lo)?;
    let mut h_hi = h(hi)?;
    let mut span = 10.0 * scale;
    let mut guard = 0;
    while h_lo > 0.0 {
        hi = lo;
        h_hi = h_lo;
        span *= 2.0;
        lo -= span;
        h_lo = h(lo)?;
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracketing(format!("no lower bracket found down to {lo}")));
        }
    }
    span = 10.0 * scale;
    while h_hi < 0.0 {
        lo = hi;
        h_lo = h_hi;
        span *= 2.0;
        hi += span;
        h_hi = h(hi)?;
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracketing(format!("no upper bracket found up to {hi}")));
        }
    }
    let tol = 1e-6 * scale;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid)?;
        if hm == 0.0 {
            return Ok(mid);
        }
        if hm < 0.0 {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
            h_hi = hm;
        }
    }
    let mut side = 0;
    for _ in 0..60 {
        if h_hi == h_lo {
            break;
        }
        let x = hi - h_hi * (hi - lo) / (h_hi - h_lo);
        let hx = h(x)?;
        if hx.abs() < 1e-14 || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(scale) {
            return Ok(x);
        }
        if hx < 0.0 {
            lo = x;
            h_lo = hx;
            if side == -1 {
                h_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            h_hi = hx;
            if side == 1 {
                h_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if h_hi.abs() < h_lo.abs() { hi } else { lo })
}

/// Regularised lower incomplete gamma function `P(r, t)`.
pub fn gamma_p(r: f64, t: f64) -> Result<f64> {
    check_positive("r", r)?;
    if !(t > 0.0) {
        return Ok(0.0);
    }
    let s = t.ln();
    if s <= r.ln() {
        gamma_mixture(r, |u| if u <= s { 1.0 } else { 0.0 }, Some(s))
    } else {
        Ok(1.0 - gamma_q(r, t)?)
    }
}

/// Regularised upper incomplete gamma function `Q(r, t) = 1 - P(r, t)`.
pub fn gamma_q(r: f64, t: f64) -> Result<f64> {
    check_positive("r", r)?;
    if !(t > 0.0) {
        return Ok(1.0);
    }
    let s = t.ln();
    if s > r.ln() {
        gamma_mixture(r, |u| if u > s { 1.0 } else { 0.0 }, Some(s))
    } else {
        Ok(1.0 - gamma_p(r, t)?)
    }
}

/// Chi-squared CDF with `nu` degrees of freedom.
pub fn chi2_cdf(nu: f64, x: f64) -> Result<f64> {
    gamma_p(0.5 * nu, 0.5 * x)
}

/// Chi-squared quantile with `nu` degrees of freedom.
pub fn chi2_quantile(nu: f64, p: f64) -> Result<f64> {
    check_positive("nu", nu)?;
    check_probability(p)?;
    let scale = (2.0 * nu).sqrt();
    let x = if p > 0.5 {
        invert_increasing(|x| Ok((1.0 - p) - gamma_q(0.5 * nu, 0.5 * x)?), nu, scale)?
    } else {
        // Work in ln x so the root stays positive for small ν and p.
        let y = invert_increasing(|y: f64| Ok(gamma_p(0.5 * nu, 0.5 * y.exp())? - p), nu.ln(), 1.0)?;
        y.exp()
    };
    Ok(x)
}

/// Exponential–normal law: `GN` with `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnParams {
    alpha: f64,
    mu: f64,
    sigma: f64,
}

impl EnParams {
    pub fn new(alpha: f64, mu: f64, sigma: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { alpha, mu, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn to_gn(&self) -> GnParams {
        GnParams { alpha: self.alpha, r: 1.0, mu: self.mu, sigma: self.sigma }
    }

    /// `ln f(z) = ln(α/2) + ln erfc(ζ/√2) + α(μ - z) + α²σ²/2`.
    pub fn log_pdf(&self, z: f64) -> Result<f64> {
        check_finite("z", z)?;
        let a = self.alpha;
        let zeta = a * self.sigma + (self.mu - z) / self.sigma;
        Ok((0.5 * a).ln() + ln_erfc(zeta / SQRT_2) + a * (self.mu - z) + 0.5 * a * a * self.sigma * self.sigma)
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        Ok(self.log_pdf(z)?.exp())
    }
}

/// Overdispersed chi-squared law `B(ν, μ, σ²)`: `GN` with `α = 1/2`, `r = ν/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdChi2Params {
    nu: f64,
    mu: f64,
    sigma: f64,
}

impl OdChi2Params {
    pub fn new(nu: f64, mu: f64, sigma: f64) -> Result<Self> {
        check_positive("nu", nu)?;
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { nu, mu, sigma })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn to_gn(&self) -> GnParams {
        GnParams { alpha: 0.5, r: 0.5 * self.nu, mu: self.mu, sigma: self.sigma }
    }

    pub fn log_pdf(&self, z: f64) -> Result<f64> {
        check_finite("z", z)?;
        let (nu, s) = (self.nu, self.sigma);
        let d = z - self.mu;
        let zeta = 0.5 * s - d / s;
        let q = (s * s + 2.0 * d) / (4.0 * s);
        let log_e = -q * q + s * s / 8.0;
        let log_d = pcf_d(-0.5 * nu, zeta)?.log_abs;
        Ok(-0.5 * nu * LN_2 - 0.5 * (2.0 * PI).ln() - (1.0 - 0.5 * nu) * s.ln() + log_d + log_e)
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        Ok(self.log_pdf(z)?.exp())
    }

    pub fn cdf(&self, z: f64) -> Result<f64> {
        self.to_gn().cdf(z)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.to_gn().quantile(p)
    }

    pub fn convolve(&self, other: &OdChi2Params) -> Result<OdChi2Params> {
        Self::new(self.nu + other.nu, self.mu + other.mu, self.sigma.hypot(other.sigma))
    }
}

impl From<EnParams> for GnParams {
    fn from(p: EnParams) -> Self {
        p.to_gn()
    }
}

impl From<OdChi2Params> for GnParams {
    fn from(p: OdChi2Params) -> Self {
        p.to_gn()
    }
}
