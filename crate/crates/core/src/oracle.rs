//! Brute-force reference implementations for cross-checking the closed forms.
//!
//! Nothing here touches the parabolic cylinder code: the density is the raw
//! convolution integral, evaluated with a double-exponential rule that is
//! independent of the adaptive Gauss–Kronrod routine used elsewhere.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{GnParams, Moments};
use crate::error::{Error, Result};
use crate::specfun::log_gamma;

const MAX_LEVEL: u32 = 12;
// Successive levels roughly square the error, so a change of 1e-12 between
// them leaves the estimate at rounding level.
const LEVEL_TOL: f64 = 1e-12;

/// Tanh-sinh rule on `[a, b]`; nodes near each end are placed by their
/// distance from it, so endpoint singularities are sampled accurately.
fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let len = b - a;
    let rule = |h: f64, odd_only: bool| {
        let mut sum = 0.0;
        let mut k: i64 = if odd_only { 1 } else { 0 };
        let step = if odd_only { 2 } else { 1 };
        loop {
            let t = k as f64 * h;
            let s = 0.5 * PI * t.sinh();
            let e = (-2.0 * s.abs()).exp();
            let near = len * e / (1.0 + e);
            let w = len * PI * t.cosh() * e / ((1.0 + e) * (1.0 + e));
            if w < 1e-300 || near == 0.0 {
                break;
            }
            let mut term = w * f(b - near);
            if k != 0 {
                term += w * f(a + near);
            }
            sum += term;
            k += step;
        }
        sum * h
    };
    let mut h = 1.0;
    let mut est = rule(h, false);
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let next = 0.5 * est + rule(h, true);
        let done = (next - est).abs() <= LEVEL_TOL * next.abs() || next == 0.0;
        est = next;
        if done {
            break;
        }
    }
    est
}

/// Exp-sinh rule on `[a, ∞)`.
fn exp_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, scale: f64) -> f64 {
    let rule = |h: f64, odd_only: bool| {
        let mut sum = 0.0;
        let step = if odd_only { 2 } else { 1 };
        let start: i64 = if odd_only { -((6.0 / h) as i64) | 1 } else { -((6.0 / h) as i64) };
        let mut k = start;
        loop {
            let t = k as f64 * h;
            let g = (0.5 * PI * t.sinh()).exp();
            let w = 0.5 * PI * t.cosh() * g * scale;
            let x = a + scale * g;
            if t > 0.0 && (w == 0.0 || !x.is_finite() || t > 6.0) {
                break;
            }
            let v = f(x);
            if v.is_finite() {
                sum += w * v;
            }
            if t > 0.0 && w * v.abs() < 1e-300 && v == 0.0 {
                break;
            }
            k += step;
        }
        sum * h
    };
    let mut h = 0.5;
    let mut est = rule(h, false);
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let next = 0.5 * est + rule(h, true);
        let done = (next - est).abs() <= LEVEL_TOL * next.abs() || next == 0.0;
        est = next;
        if done {
            break;
        }
    }
    est
}

/// `ln ∫₀^∞ x^{r-1} e^{-βx - (x-d)²/(2s²)} dx` for any real `β`.
fn log_gamma_gauss_integral(r: f64, beta: f64, d: f64, s: f64) -> f64 {
    let log_kernel = |x: f64| (r - 1.0) * x.ln() - beta * x - (x - d) * (x - d) / (2.0 * s * s);

    // Mode of the kernel (for r ≤ 1 it sits at the origin) and a width.
    let b = d - beta * s * s;
    let peak = if r > 1.0 { 0.5 * (b + (b * b + 4.0 * (r - 1.0) * s * s).sqrt()) } else { b.max(0.0) };
    let curv = if r > 1.0 && peak > 0.0 { (r - 1.0) / (peak * peak) } else { 0.0 } + 1.0 / (s * s);
    let width = 1.0 / curv.sqrt();
    let shift = if peak > 0.0 { log_kernel(peak) } else { log_kernel(width.min(1.0) * 1e-3).max(-700.0) };

    let f = |x: f64| (log_kernel(x) - shift).exp();
    let c1 = (peak - 12.0 * width).max(0.0);
    let c2 = peak + 12.0 * width;
    let mut sum = 0.0;
    if c1 > 0.0 {
        sum += tanh_sinh(&f, 0.0, c1);
    }
    sum += tanh_sinh(&f, c1, c2);
    sum += exp_sinh(&f, c2, width);
    shift + sum.ln()
}

/// Density by direct quadrature of the convolution
/// `α^r/Γ(r) ∫₀^∞ x^{r-1} e^{-αx} φ((z - μ - x)/σ)/σ dx`.
pub fn conv_pdf(params: &GnParams, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("z must be finite, got {z}")));
    }
    let [alpha, r, mu, sigma] = params.to_array();
    let log_pre = r * alpha.ln() - log_gamma(r)? - 0.5 * (2.0 * PI).ln() - sigma.ln();
    Ok((log_pre + log_gamma_gauss_integral(r, alpha, z - mu, sigma)).exp())
}

/// `ln D_p(z)` for `p < 0` by direct quadrature of
/// `e^{-z²/4}/Γ(-p) ∫₀^∞ e^{-xz - x²/2} x^{-p-1} dx`.
pub fn pcf_d_direct(p: f64, z: f64) -> Result<f64> {
    if !(p < 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("need p < 0 and finite z, got p={p}, z={z}")));
    }
    Ok(-0.25 * z * z - log_gamma(-p)? + log_gamma_gauss_integral(-p, z, 0.0, 1.0))
}

/// Density of the sum of two independent variables with densities `f` and
/// `g`, by quadrature of `∫ f(x) g(z - x) dx` over `[lo, hi]`.
pub fn numerical_convolution<F, G>(f: F, g: G, z: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = 16;
    let step = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let a = lo + i as f64 * step;
            tanh_sinh(&|x: f64| f(x) * g(z - x), a, a + step)
        })
        .sum()
}

/// Central-difference gradient with steps `rel_step·max(|θ_i|, 1)`.
pub fn fd_gradient<const N: usize, F>(f: F, theta: [f64; N], rel_step: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> f64,
{
    let mut g = [0.0; N];
    for i in 0..N {
        let h = rel_step * theta[i].abs().max(1.0);
        let mut up = theta;
        let mut dn = theta;
        up[i] += h;
        dn[i] -= h;
        g[i] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian, symmetrised.
pub fn fd_hessian<const N: usize, F>(f: F, theta: [f64; N], rel_step: f64) -> [[f64; N]; N]
where
    F: Fn(&[f64; N]) -> f64,
{
    let h: Vec<f64> = theta.iter().map(|t| rel_step * t.abs().max(1.0)).collect();
    let f0 = f(&theta);
    let at = |i: usize, si: f64, j: usize, sj: f64| {
        let mut x = theta;
        x[i] += si * h[i];
        x[j] += sj * h[j];
        f(&x)
    };
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        out[i][i] = (at(i, 1.0, i, 0.0) - 2.0 * f0 + at(i, -1.0, i, 0.0)) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Uniform evaluation grid `lo, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || n_points < 2 {
            return Err(Error::Domain(format!("bad grid [{lo}, {hi}] with {n_points} points")));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.n_points - 1) as f64
    }
}

/// Quantile from a trapezoidal CDF of [`conv_pdf`] on `grid`, linearly interpolated.
pub fn grid_cdf_quantile(params: &GnParams, grid: GridSpec, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let pdf: Vec<f64> = (0..grid.n_points).into_par_iter().map(|i| conv_pdf(params, grid.point(i))).collect::<Result<_>>()?;
    let h = (grid.hi - grid.lo) / (grid.n_points - 1) as f64;
    let mut cum = 0.0;
    for i in 1..grid.n_points {
        let next = cum + 0.5 * h * (pdf[i - 1] + pdf[i]);
        if next >= p {
            let frac = (p - cum) / (next - cum);
            return Ok(grid.point(i - 1) + frac * h);
        }
        cum = next;
    }
    Err(Error::Bracketing(format!("grid mass {cum} never reaches p = {p}")))
}

/// Sample mean, variance and third central moment from `n` seeded draws.
pub fn mc_moments(params: &GnParams, n: usize, seed: u64) -> Moments {
    let x = params.sample_values(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let m = x.iter().sum::<f64>() / n as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in &x {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    Moments { mean: m, variance: m2 / (n - 1) as f64, third_central: m3 / n as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::EnParams;

    #[test]
    fn agrees_with_closed_form() {
        let p = GnParams::new(0.5, 2.5, 0.0, 1.0).unwrap();
        let a = conv_pdf(&p, 3.0).unwrap();
        let b = p.pdf(3.0).unwrap();
        assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
    }

    #[test]
    fn exponential_case_matches_erf_form() {
        let en = EnParams::new(0.7, 1.0, 0.6).unwrap();
        for z in [-1.0, 0.5, 1.0, 3.0, 8.0] {
            let a = conv_pdf(&en.to_gn(), z).unwrap();
            let b = en.pdf(z).unwrap();
            assert!((a - b).abs() < 1e-9 * b, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn small_shape_singularity() {
        let p = GnParams::new(2.0, 0.3, 0.0, 0.4).unwrap();
        for z in [-0.5, 0.0, 0.4, 2.0] {
            let a = conv_pdf(&p, z).unwrap();
            let b = p.pdf(z).unwrap();
            assert!((a - b).abs() < 1e-9 * b, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn direct_pcf_closed_form() {
        // D_{-1}(0) = √(π/2)
        let v = pcf_d_direct(-1.0, 0.0).unwrap();
        assert!((v - (0.5 * PI).sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn deep_left_tail_vanishes() {
        let p = GnParams::new(1.0, 2.0, 0.0, 1.0).unwrap();
        assert!(conv_pdf(&p, -15.0).unwrap() <= 1e-30);
    }

    #[test]
    fn fd_on_quadratic() {
        let f = |x: &[f64; 2]| 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] - x[1] * x[1] + x[0];
        let g = fd_gradient(f, [1.0, 2.0], 1e-5);
        assert!((g[0] - 11.0).abs() < 1e-10 && (g[1] - (-2.0)).abs() < 1e-10);
        let h = fd_hessian(f, [1.0, 2.0], 1e-3);
        assert!((h[0][0] - 6.0).abs() < 1e-8);
        assert!((h[0][1] - 2.0).abs() < 1e-8 && h[0][1] == h[1][0]);
        assert!((h[1][1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(GridSpec::new(1.0, 0.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
    }
}
