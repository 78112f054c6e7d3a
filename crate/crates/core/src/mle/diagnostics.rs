use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::data::Dataset;
use crate::dist::GnParams;
use crate::error::Result;
use crate::mle::FitResult;

/// Eigen-analysis of an information matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub determinant: f64,
    /// `det / n^k` with `k` the matrix dimension, comparable across sample sizes.
    pub scaled_determinant: f64,
    pub positive_definite: bool,
    /// `max|λ| / min|λ|`; infinite when an eigenvalue is exactly zero.
    pub condition_number: f64,
    /// `min|λ| / max|λ|`.
    pub eigen_ratio: f64,
    /// `eigen_ratio < 1e-6` or `determinant ≤ 0`.
    pub near_singular: bool,
}

impl IdentifiabilityReport {
    pub fn from_information(info: &DMatrix<f64>, n: usize) -> Self {
        let k = info.nrows();
        let sym = (info + info.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let determinant: f64 = eigenvalues.iter().product();
        let max_abs = eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let min_abs = eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
        let eigen_ratio = if max_abs > 0.0 { min_abs / max_abs } else { 0.0 };
        Self {
            scaled_determinant: determinant / (n as f64).powi(k as i32),
            positive_definite: eigenvalues.iter().all(|&e| e > 0.0),
            condition_number: if min_abs > 0.0 { max_abs / min_abs } else { f64::INFINITY },
            near_singular: eigen_ratio < 1e-6 || determinant <= 0.0,
            eigen_ratio,
            eigenvalues,
            determinant,
        }
    }
}

/// Diagnostics for the observed information of a fit.
pub fn identifiability_report(result: &FitResult) -> IdentifiabilityReport {
    IdentifiabilityReport::from_information(&result.observed_info, result.n)
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the p-value.
    pub n_eff: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2)).map(|m| (c * m).exp()).sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample test of `data` (original scale) against `GN(params)`.
///
/// The p-value is the asymptotic Kolmogorov tail at `√N·D_N`, without
/// small-sample correction.
pub fn ks_test(data: &Dataset, params: &GnParams) -> Result<KsResult> {
    let mut z = data.original_values();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in z.iter().enumerate() {
        let f = params.cdf(x)?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(n.sqrt() * d), n_eff: n })
}

/// Two-sample test of equal distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    KsResult { statistic: d, p_value: kolmogorov_sf(n_eff.sqrt() * d), n_eff }
}
