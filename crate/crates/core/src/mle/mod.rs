//! Likelihood, analytic score and observed information, fitting and
//! diagnostics.
//!
//! Per-datum averages follow the notation `u_i = μ - z_i`, `R_i = D'_{-r}(ζ_i)/D_{-r}(ζ_i)`:
//!
//! ```text
//! Z₁ = ⟨u⟩   Z₂ = ⟨u²⟩   S = ⟨R⟩   S_μ = ⟨u·R⟩   T = ⟨A_r/A⟩
//! S_ζ = ⟨∂ζR⟩   S_r = ⟨∂rR⟩   S_{r,μ} = ⟨u·∂rR⟩   T_r = ⟨∂r(A_r/A)⟩
//! S_{ζ,μ} = ⟨u·∂ζR⟩   S_{ζ,μ²} = ⟨u²·∂ζR⟩
//! ```

mod diagnostics;
mod fit;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::dist::GnParams;
use crate::error::Result;
use crate::specfun::{digamma, pcf_log_derivatives, trigamma, PcfLogDerivatives};

pub use diagnostics::{identifiability_report, kolmogorov_sf, ks_test, ks_two_sample, IdentifiabilityReport, KsResult};
pub use fit::{
    fit, plug_in_fit, reduced_system_residual, sprott_residual, FitResult, FitSpec, Param, Termination,
};

/// Per-datum averages entering the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreSums {
    pub z1: f64,
    pub z2: f64,
    pub s: f64,
    pub s_mu: f64,
    pub t: f64,
}

/// Per-datum averages entering the observed information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoSums {
    pub s_zeta: f64,
    pub s_r: f64,
    pub s_r_mu: f64,
    pub t_r: f64,
    pub s_zeta_mu: f64,
    pub s_zeta_mu2: f64,
}

/// Log-likelihood, score and observed information from a single pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub log_likelihood: f64,
    pub score: [f64; 4],
    /// Observed information `-∂²𝓛/∂θ∂θᵀ` over `(α, r, μ, σ)`.
    pub info: Matrix4<f64>,
    pub score_sums: ScoreSums,
    pub info_sums: InfoSums,
}

// Evaluated in parallel, reduced sequentially in data order so results do not
// depend on the thread count.
fn per_datum(params: &GnParams, data: &Dataset) -> Result<Vec<PcfLogDerivatives>> {
    let r = params.r();
    data.values().par_iter().map(|&z| pcf_log_derivatives(r, params.zeta(z))).collect()
}

fn accumulate(params: &GnParams, data: &Dataset, terms: &[PcfLogDerivatives]) -> (f64, ScoreSums, InfoSums) {
    let mu = params.mu();
    let mut ll = 0.0;
    let mut acc = [0.0f64; 11];
    for (&z, d) in data.values().iter().zip(terms) {
        let u = mu - z;
        ll += params.log_pdf_from_log_d(z, d.log_d);
        acc[0] += u;
        acc[1] += u * u;
        acc[2] += d.ratio;
        acc[3] += u * d.ratio;
        acc[4] += d.a_ratio;
        acc[5] += d.ratio_dzeta;
        acc[6] += d.ratio_dr;
        acc[7] += u * d.ratio_dr;
        acc[8] += d.a_ratio_dr;
        acc[9] += u * d.ratio_dzeta;
        acc[10] += u * u * d.ratio_dzeta;
    }
    let n = data.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    let ss = ScoreSums { z1: acc[0], z2: acc[1], s: acc[2], s_mu: acc[3], t: acc[4] };
    let is = InfoSums {
        s_zeta: acc[5],
        s_r: acc[6],
        s_r_mu: acc[7],
        t_r: acc[8],
        s_zeta_mu: acc[9],
        s_zeta_mu2: acc[10],
    };
    (ll, ss, is)
}

impl ScoreSums {
    pub fn compute(params: &GnParams, data: &Dataset) -> Result<Self> {
        let terms = per_datum(params, data)?;
        Ok(accumulate(params, data, &terms).1)
    }
}

impl InfoSums {
    pub fn compute(params: &GnParams, data: &Dataset) -> Result<Self> {
        let terms = per_datum(params, data)?;
        Ok(accumulate(params, data, &terms).2)
    }
}

/// Score vector `∂𝓛/∂(α, r, μ, σ)` from the averaged sums.
pub fn score_from_sums(params: &GnParams, n: usize, ss: &ScoreSums) -> Result<[f64; 4]> {
    let [a, r, _, s] = params.to_array();
    let n = n as f64;
    Ok([
        n * (r / a + ss.s * s + 0.5 * a * s * s + 0.5 * ss.z1),
        n * ((a * s).ln() + ss.t - digamma(r)?),
        n * (ss.s / s + 0.5 * a - 0.5 * ss.z1 / (s * s)),
        n * ((r - 1.0) / s + ss.s * a - ss.s_mu / (s * s) + 0.5 * s * a * a + 0.5 * ss.z2 / (s * s * s)),
    ])
}

/// Observed information `-∂²𝓛/∂θ∂θᵀ` from the averaged sums.
pub fn info_from_sums(params: &GnParams, n: usize, ss: &ScoreSums, is: &InfoSums) -> Result<Matrix4<f64>> {
    let [a, r, _, s] = params.to_array();
    let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
    let h_aa = -r / (a * a) + s2 * (is.s_zeta + 0.5);
    let h_ar = 1.0 / a + s * is.s_r;
    let h_am = is.s_zeta + 0.5;
    let h_as = a * s * is.s_zeta - is.s_zeta_mu / s + ss.s + a * s;
    let h_rr = is.t_r - trigamma(r)?;
    let h_rm = is.s_r / s;
    let h_rs = 1.0 / s + a * is.s_r - is.s_r_mu / s2;
    let h_mm = is.s_zeta / s2 - 0.5 / s2;
    let h_ms = a * is.s_zeta / s - ss.s / s2 - is.s_zeta_mu / s3 + ss.z1 / s3;
    let h_ss = -(r - 1.0) / s2 + a * a * is.s_zeta - 2.0 * a * is.s_zeta_mu / s2 + is.s_zeta_mu2 / s4
        + 0.5 * a * a
        + 2.0 * ss.s_mu / s3
        - 1.5 * ss.z2 / s4;
    let h = Matrix4::new(
        h_aa, h_ar, h_am, h_as, //
        h_ar, h_rr, h_rm, h_rs, //
        h_am, h_rm, h_mm, h_ms, //
        h_as, h_rs, h_ms, h_ss,
    );
    Ok(h * -(n as f64))
}

/// Log-likelihood, score and information at `params`.
pub fn evaluate(params: &GnParams, data: &Dataset) -> Result<Evaluation> {
    let terms = per_datum(params, data)?;
    let (log_likelihood, score_sums, info_sums) = accumulate(params, data, &terms);
    Ok(Evaluation {
        log_likelihood,
        score: score_from_sums(params, data.len(), &score_sums)?,
        info: info_from_sums(params, data.len(), &score_sums, &info_sums)?,
        score_sums,
        info_sums,
    })
}

/// `Σ ln f(z_i)`.
pub fn log_likelihood(params: &GnParams, data: &Dataset) -> Result<f64> {
    let r = params.r();
    let parts: Vec<f64> = data
        .values()
        .par_iter()
        .map(|&z| Ok(params.log_pdf_from_log_d(z, crate::specfun::pcf_d(-r, params.zeta(z))?.log_abs)))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// `∂𝓛/∂(α, r, μ, σ)`.
pub fn score(params: &GnParams, data: &Dataset) -> Result<[f64; 4]> {
    let ss = ScoreSums::compute(params, data)?;
    score_from_sums(params, data.len(), &ss)
}

/// Observed information over `(α, r, μ, σ)`.
pub fn observed_info(params: &GnParams, data: &Dataset) -> Result<Matrix4<f64>> {
    Ok(evaluate(params, data)?.info)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        GnParams::new(0.8, 1.7, 2.0, 1.3).unwrap().sample(40, 5).unwrap()
    }

    #[test]
    fn single_datum_matches_log_pdf() {
        let p = GnParams::new(0.5, 2.5, 0.0, 1.0).unwrap();
        let d = Dataset::new(vec![3.3]).unwrap();
        assert_eq!(log_likelihood(&p, &d).unwrap(), p.log_pdf(3.3).unwrap());
        assert_eq!(evaluate(&p, &d).unwrap().log_likelihood, p.log_pdf(3.3).unwrap());
    }

    #[test]
    fn sums_match_direct_definitions() {
        let p = GnParams::new(0.9, 1.2, 0.5, 0.7).unwrap();
        let d = data();
        let ss = ScoreSums::compute(&p, &d).unwrap();
        let n = d.len() as f64;
        let z1: f64 = d.values().iter().map(|z| p.mu() - z).sum::<f64>() / n;
        let z2: f64 = d.values().iter().map(|z| (p.mu() - z).powi(2)).sum::<f64>() / n;
        assert!((ss.z1 - z1).abs() < 1e-12);
        assert!((ss.z2 - z2).abs() < 1e-12);
        assert!(ss.z2 >= ss.z1 * ss.z1);
        let s: f64 = d.values().iter().map(|&z| crate::specfun::pcf_ratio(p.r(), p.zeta(z)).unwrap()).sum::<f64>() / n;
        assert!((ss.s - s).abs() < 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = GnParams::new(0.8, 1.7, 2.0, 1.3).unwrap();
        let d = data();
        let g = score(&p, &d).unwrap();
        let theta = p.to_array();
        for k in 0..4 {
            let h = 1e-5 * theta[k].abs().max(1.0);
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (log_likelihood(&GnParams::from_array(up).unwrap(), &d).unwrap()
                - log_likelihood(&GnParams::from_array(dn).unwrap(), &d).unwrap())
                / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "component {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn info_is_symmetric() {
        let p = GnParams::new(0.8, 1.7, 2.0, 1.3).unwrap();
        let i = observed_info(&p, &data()).unwrap();
        assert_eq!(i, i.transpose());
    }

    #[test]
    fn info_matches_score_differences() {
        let p = GnParams::new(0.8, 1.7, 2.0, 1.3).unwrap();
        let d = data();
        let info = observed_info(&p, &d).unwrap();
        let theta = p.to_array();
        for k in 0..4 {
            let h = 1e-5 * theta[k].abs().max(1.0);
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let gu = score(&GnParams::from_array(up).unwrap(), &d).unwrap();
            let gd = score(&GnParams::from_array(dn).unwrap(), &d).unwrap();
            for j in 0..4 {
                let fd = -(gu[j] - gd[j]) / (2.0 * h);
                assert!((info[(j, k)] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "({j},{k}): {} vs {fd}", info[(j, k)]);
            }
        }
    }

    #[test]
    fn translation_of_data_and_location() {
        let p = GnParams::new(0.8, 1.7, 2.0, 1.3).unwrap();
        let d = data();
        let c = 11.25;
        let moved = Dataset::new(d.values().iter().map(|z| z + c).collect()).unwrap();
        let a = log_likelihood(&p, &d).unwrap();
        let b = log_likelihood(&p.with_mu(2.0 + c).unwrap(), &moved).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
