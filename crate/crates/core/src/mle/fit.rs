use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use serde::Serialize;

use crate::data::Dataset;
use crate::dist::GnParams;
use crate::error::{Error, Result};
use crate::mle::{evaluate, Evaluation};

/// One coordinate of `θ = (α, r, μ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Alpha,
    R,
    Mu,
    Sigma,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Alpha, Param::R, Param::Mu, Param::Sigma];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::R => "r",
            Param::Mu => "mu",
            Param::Sigma => "sigma",
        }
    }

    // α, r and σ are solved for on the log scale.
    fn is_log(self) -> bool {
        self != Param::Mu
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" | "a" => Ok(Param::Alpha),
            "r" | "shape" => Ok(Param::R),
            "mu" => Ok(Param::Mu),
            "sigma" => Ok(Param::Sigma),
            other => Err(Error::InvalidFitSpec(format!("unknown parameter '{other}'"))),
        }
    }
}

/// What to fit and how.
///
/// `initial` is on the scale of the dataset's original values; fixed
/// parameters are taken from it and echoed exactly in the result.
#[derive(Debug, Clone)]
pub struct FitSpec {
    pub data: Dataset,
    pub free_mask: [bool; 4],
    pub initial: GnParams,
    pub max_iter: usize,
    pub score_tol: f64,
    pub step_tol: f64,
}

impl FitSpec {
    /// All four parameters free, moment-based starting point and default tolerances.
    pub fn new(data: Dataset) -> Result<Self> {
        if data.is_degenerate() {
            return Err(Error::DegenerateData(data.len()));
        }
        let initial = moment_init(&data, [None; 4])?;
        let n = data.len() as f64;
        Ok(Self { data, free_mask: [true; 4], initial, max_iter: 200, score_tol: 1e-8 * n, step_tol: 1e-10 })
    }

    /// Holds `param` at `value` and re-derives the starting values of the rest.
    pub fn fix(mut self, param: Param, value: f64) -> Result<Self> {
        self.free_mask[param.index()] = false;
        let mut fixed = [None; 4];
        let current = self.initial.to_array();
        for p in Param::ALL {
            if !self.free_mask[p.index()] {
                fixed[p.index()] = Some(if p == param { value } else { current[p.index()] });
            }
        }
        self.initial = moment_init(&self.data, fixed)?;
        Ok(self)
    }

    pub fn with_initial(mut self, initial: GnParams) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_score_tol(mut self, tol: f64) -> Self {
        self.score_tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn free_params(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| self.free_mask[p.index()]).collect()
    }

    fn validate(&self) -> Result<()> {
        if !self.free_mask.iter().any(|&f| f) {
            return Err(Error::InvalidFitSpec("at least one parameter must be free".into()));
        }
        if self.data.is_degenerate() {
            return Err(Error::DegenerateData(self.data.len()));
        }
        if !(self.score_tol > 0.0) || !(self.step_tol > 0.0) {
            return Err(Error::InvalidFitSpec("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidFitSpec("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Starting values from the sample moments, honouring any fixed values.
///
/// `μ₀ = min(z) - 0.1·sd`, `σ₀ = sd/2`, and the gamma part takes mean
/// `z̄ - μ₀` and whatever variance the normal part leaves (at least a quarter).
fn moment_init(data: &Dataset, fixed: [Option<f64>; 4]) -> Result<GnParams> {
    let shift = data.shift();
    let sd = data.std_dev().max(f64::MIN_POSITIVE);
    let mean = data.mean() + shift;
    let var = sd * sd;
    let mu = fixed[2].unwrap_or(data.min() + shift - 0.1 * sd);
    let sigma = fixed[3].unwrap_or((0.5 * sd).max(1e-2 * sd));
    let m = (mean - mu).max(1e-2 * sd);
    let gamma_var = (var - sigma * sigma).max(0.25 * var);
    let (alpha, r) = match (fixed[0], fixed[1]) {
        (Some(a), Some(r)) => (a, r),
        (Some(a), None) => (a, (a * m).max(1e-2)),
        (None, Some(r)) => ((r / m).max(1e-2 / sd), r),
        (None, None) => {
            let a = (m / gamma_var).max(1e-2 / sd);
            (a, (a * m).max(1e-2))
        }
    };
    GnParams::new(alpha, r, mu, sigma)
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Score below tolerance and the last step below the step tolerance.
    Converged,
    /// Score below tolerance and no step can raise the likelihood measurably.
    Stationary,
    /// Damping could not produce an uphill step while the score is still large.
    Stalled,
    MaxIterations,
}

/// Outcome of [`fit`]. Matrices are indexed by the free parameters in
/// `(α, r, μ, σ)` order.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: GnParams,
    pub free_mask: [bool; 4],
    /// Full score `∂𝓛/∂(α, r, μ, σ)` at the estimate.
    pub score_residual: [f64; 4],
    pub observed_info: DMatrix<f64>,
    /// Observed information over all four parameters.
    pub full_info: Matrix4<f64>,
    /// Inverse of `observed_info`, when it is invertible.
    pub covariance: Option<DMatrix<f64>>,
    /// Ascending eigenvalues of `observed_info`.
    pub eigenvalues: Vec<f64>,
    pub determinant: f64,
    pub positive_definite: bool,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub n: usize,
}

impl FitResult {
    pub fn free_params(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| self.free_mask[p.index()]).collect()
    }

    /// Position of `p` within the free-parameter matrices.
    pub fn free_index(&self, p: Param) -> Option<usize> {
        self.free_params().iter().position(|&q| q == p)
    }

    /// Square roots of the covariance diagonal, `None` for fixed parameters
    /// or where the diagonal is not positive.
    pub fn standard_errors(&self) -> [Option<f64>; 4] {
        let mut out = [None; 4];
        if let Some(cov) = &self.covariance {
            for (i, p) in self.free_params().into_iter().enumerate() {
                let v = cov[(i, i)];
                if v > 0.0 && v.is_finite() {
                    out[p.index()] = Some(v.sqrt());
                }
            }
        }
        out
    }

    pub fn covariance_entry(&self, p: Param, q: Param) -> Option<f64> {
        let cov = self.covariance.as_ref()?;
        Some(cov[(self.free_index(p)?, self.free_index(q)?)])
    }
}

fn free_indices(mask: &[bool; 4]) -> Vec<usize> {
    (0..4).filter(|&i| mask[i]).collect()
}

// Score and curvature in the solver coordinates φ (log for α, r, σ).
fn solver_system(theta: &[f64; 4], ev: &Evaluation, free: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let k = free.len();
    let d: Vec<f64> = free.iter().map(|&i| if Param::ALL[i].is_log() { theta[i] } else { 1.0 }).collect();
    let g = DVector::from_iterator(k, free.iter().zip(&d).map(|(&i, di)| di * ev.score[i]));
    let mut j = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            j[(a, b)] = d[a] * d[b] * ev.info[(free[a], free[b])];
        }
        if Param::ALL[free[a]].is_log() {
            j[(a, a)] -= g[a];
        }
    }
    (g, j)
}

fn apply_step(theta: &[f64; 4], free: &[usize], step: &DVector<f64>) -> [f64; 4] {
    let mut out = *theta;
    for (a, &i) in free.iter().enumerate() {
        if Param::ALL[i].is_log() {
            out[i] = theta[i] * step[a].exp();
        } else {
            out[i] = theta[i] + step[a];
        }
    }
    out
}

// Caps a step at a factor e² in scale parameters and 5σ in location.
fn cap_step(step: &mut DVector<f64>, theta: &[f64; 4], free: &[usize]) {
    let mut factor: f64 = 1.0;
    for (a, &i) in free.iter().enumerate() {
        let limit = if Param::ALL[i].is_log() { 2.0 } else { 5.0 * theta[3] };
        if step[a].abs() > limit {
            factor = factor.min(limit / step[a].abs());
        }
    }
    if factor < 1.0 {
        *step *= factor;
    }
}

/// Maximises the likelihood over the free parameters of `spec`.
///
/// Damped Newton (Levenberg–Marquardt) on the score, with the analytic
/// observed information as Jacobian. Steps are accepted only when they raise
/// the log-likelihood. If the analytic information is not finite at an
/// iterate, a central-difference Jacobian of the score is used instead.
pub fn fit(spec: &FitSpec) -> Result<FitResult> {
    spec.validate()?;
    let data = &spec.data;
    let shift = data.shift();
    let free = free_indices(&spec.free_mask);
    let mut theta = spec.initial.to_array();
    theta[2] -= shift;
    let mut ev = evaluate(&GnParams::from_array(theta)?, data)?;
    if !ev.log_likelihood.is_finite() {
        return Err(Error::InvalidFitSpec("log-likelihood is not finite at the initial point".into()));
    }

    let mut lambda = 0.0_f64;
    let mut last_step = f64::INFINITY;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    while iterations < spec.max_iter {
        iterations += 1;
        let score_ok = free.iter().all(|&i| ev.score[i].abs() < spec.score_tol);
        if score_ok && last_step < spec.step_tol {
            termination = Termination::Converged;
            break;
        }
        if ev.info.iter().any(|v| !v.is_finite()) {
            ev.info = fd_info(&theta, data)?;
        }
        let (g, j) = solver_system(&theta, &ev, &free);
        let ll_floor = 1e-12 * ev.log_likelihood.abs().max(1.0);
        let diag_max = (0..j.nrows()).map(|a| j[(a, a)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let mut accepted = false;
        let mut negligible = false;
        for _ in 0..40 {
            let mut m = j.clone();
            for a in 0..m.nrows() {
                m[(a, a)] += lambda * j[(a, a)].abs().max(1e-9 * diag_max);
            }
            let Some(chol) = m.cholesky() else {
                lambda = (lambda * 10.0).max(1e-6);
                continue;
            };
            let mut step = chol.solve(&g);
            cap_step(&mut step, &theta, &free);
            let predicted = g.dot(&step) - 0.5 * step.dot(&(&j * &step));
            if score_ok && predicted.abs() < ll_floor {
                negligible = true;
                break;
            }
            let trial = apply_step(&theta, &free, &step);
            let trial_ev = GnParams::from_array(trial).and_then(|p| evaluate(&p, data));
            // Near the optimum the likelihood change drowns in rounding, so
            // a step there is judged by whether it shrinks the score instead.
            let rounding = predicted.abs() < 100.0 * ll_floor;
            let score_max = |e: &Evaluation| free.iter().map(|&i| e.score[i].abs()).fold(0.0, f64::max);
            match trial_ev {
                Ok(t) if t.log_likelihood.is_finite()
                    && (t.log_likelihood > ev.log_likelihood
                        || (rounding
                            && t.log_likelihood >= ev.log_likelihood - ll_floor
                            && score_max(&t) < score_max(&ev))) =>
                {
                    last_step = step.amax();
                    theta = trial;
                    ev = t;
                    lambda = if lambda < 1e-9 { 0.0 } else { lambda / 10.0 };
                    accepted = true;
                    break;
                }
                _ => lambda = (lambda * 10.0).max(1e-6),
            }
            if lambda > 1e16 {
                break;
            }
        }
        if negligible {
            termination = Termination::Stationary;
            break;
        }
        if !accepted {
            termination = if score_ok { Termination::Stationary } else { Termination::Stalled };
            break;
        }
    }
    if termination == Termination::MaxIterations
        && free.iter().all(|&i| ev.score[i].abs() < spec.score_tol)
        && last_step < spec.step_tol
    {
        termination = Termination::Converged;
    }

    if ev.info.iter().any(|v| !v.is_finite()) {
        ev.info = fd_info(&theta, data)?;
    }
    let k = free.len();
    let info = DMatrix::from_fn(k, k, |a, b| ev.info[(free[a], free[b])]);
    let eig = SymmetricEigen::new(info.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let determinant = eigenvalues.iter().product();
    let positive_definite = eigenvalues.iter().all(|&e| e > 0.0);
    let covariance = if positive_definite {
        info.clone().cholesky().map(|c| c.inverse())
    } else {
        info.clone().try_inverse()
    };

    let mut theta_out = theta;
    theta_out[2] += shift;
    let fixed = spec.initial.to_array();
    for ((out, &free), value) in theta_out.iter_mut().zip(&spec.free_mask).zip(fixed) {
        if !free {
            *out = value;
        }
    }
    Ok(FitResult {
        theta_hat: GnParams::from_array(theta_out)?,
        free_mask: spec.free_mask,
        score_residual: ev.score,
        observed_info: info,
        full_info: ev.info,
        covariance,
        eigenvalues,
        determinant,
        positive_definite,
        converged: matches!(termination, Termination::Converged | Termination::Stationary),
        termination,
        iterations,
        log_likelihood: ev.log_likelihood,
        n: data.len(),
    })
}

// Central differences of the analytic score.
fn fd_info(theta: &[f64; 4], data: &Dataset) -> Result<Matrix4<f64>> {
    let mut info = Matrix4::zeros();
    for k in 0..4 {
        let h = 1e-6 * theta[k].abs().max(1e-3);
        let mut up = *theta;
        let mut dn = *theta;
        up[k] += h;
        dn[k] -= h;
        let gu = crate::mle::score(&GnParams::from_array(up)?, data)?;
        let gd = crate::mle::score(&GnParams::from_array(dn)?, data)?;
        for j in 0..4 {
            info[(j, k)] = -(gu[j] - gd[j]) / (2.0 * h);
        }
    }
    Ok((info + info.transpose()) * 0.5)
}

/// `μ̂ + r̂/α̂ - z̄`, which vanishes when α and μ are both fitted.
pub fn sprott_residual(result: &FitResult, data: &Dataset) -> f64 {
    let t = &result.theta_hat;
    t.mu() + t.r() / t.alpha() - (data.mean() + data.shift())
}

/// The reduced score system: the r-equation, the combined α/μ equation and
/// the σ-equation (each divided by N) after eliminating `Z₁`, followed by
/// Sprott's relation `r - (z̄ - μ)α`.
pub fn reduced_system_residual(params: &GnParams, data: &Dataset) -> Result<[f64; 4]> {
    let p = params.with_mu(params.mu() - data.shift())?;
    let ss = crate::mle::ScoreSums::compute(&p, data)?;
    let [a, r, mu, s] = p.to_array();
    let zbar = data.mean();
    Ok([
        (a * s).ln() + ss.t - crate::specfun::digamma(r)?,
        0.5 * r / a + ss.s * s + 0.5 * a * s * s,
        0.5 * r - 1.0 + 0.5 * ss.z2 / (s * s) - ss.s_mu / s,
        r - (zbar - mu) * a,
    ])
}

/// Two-stage fit: `μ` and `σ` are set to the background sample mean and
/// standard deviation, then `(α, r)` are fitted to the signal.
pub fn plug_in_fit(signal: &Dataset, background: &Dataset) -> Result<FitResult> {
    if background.len() < 2 {
        return Err(Error::InvalidData("background needs at least two values".into()));
    }
    if background.is_degenerate() {
        return Err(Error::DegenerateData(background.len()));
    }
    let mu = background.mean() + background.shift();
    let sigma = background.std_dev();
    let spec = FitSpec::new(signal.clone())?.fix(Param::Mu, mu)?.fix(Param::Sigma, sigma)?;
    fit(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_names_round_trip() {
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
        assert!("beta".parse::<Param>().is_err());
    }

    #[test]
    fn degenerate_data_is_refused() {
        let d = Dataset::new(vec![2.0; 10]).unwrap();
        assert!(matches!(FitSpec::new(d), Err(Error::DegenerateData(10))));
    }

    #[test]
    fn fixing_everything_is_invalid() {
        let d = Dataset::new(vec![1.0, 2.0, 4.0]).unwrap();
        let mut spec = FitSpec::new(d).unwrap();
        for p in Param::ALL {
            let v = spec.initial.to_array()[p.index()];
            spec = spec.fix(p, v).unwrap();
        }
        assert!(matches!(fit(&spec), Err(Error::InvalidFitSpec(_))));
    }

    #[test]
    fn od_chi2_regime_recovers_parent() {
        let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
        let d = truth.sample(100, 3).unwrap();
        let spec = FitSpec::new(d).unwrap().fix(Param::Alpha, 0.5).unwrap();
        let res = fit(&spec).unwrap();
        assert!(res.converged, "{:?}", res.termination);
        assert!(res.positive_definite);
        assert_eq!(res.theta_hat.alpha(), 0.5);
        let se = res.standard_errors();
        for p in [Param::R, Param::Mu, Param::Sigma] {
            let i = p.index();
            let dev = (res.theta_hat.to_array()[i] - truth.to_array()[i]).abs();
            assert!(dev < 3.0 * se[i].unwrap(), "{p}: dev {dev} se {:?}", se[i]);
        }
        for p in [Param::R, Param::Mu, Param::Sigma] {
            assert!(res.score_residual[p.index()].abs() < spec.score_tol);
        }
    }

    #[test]
    fn fit_is_idempotent() {
        let d = GnParams::new(0.5, 1.0, 1.0, 1.0).unwrap().sample(100, 9).unwrap();
        let spec = FitSpec::new(d).unwrap().fix(Param::R, 1.0).unwrap();
        let first = fit(&spec).unwrap();
        assert!(first.converged);
        let again = fit(&spec.clone().with_initial(first.theta_hat)).unwrap();
        assert!(again.iterations <= 2);
        for (a, b) in first.theta_hat.to_array().iter().zip(again.theta_hat.to_array()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_equivariance() {
        let d = GnParams::new(0.5, 1.0, 1.0, 1.0).unwrap().sample(80, 21).unwrap();
        let moved = Dataset::new(d.values().iter().map(|z| z + 100.0).collect()).unwrap();
        let a = fit(&FitSpec::new(d).unwrap().fix(Param::R, 1.0).unwrap()).unwrap();
        let b = fit(&FitSpec::new(moved.clone()).unwrap().fix(Param::R, 1.0).unwrap()).unwrap();
        let c = fit(&FitSpec::new(moved.shifted(100.0)).unwrap().fix(Param::R, 1.0).unwrap()).unwrap();
        for fitted in [&b, &c] {
            assert!((fitted.theta_hat.mu() - a.theta_hat.mu() - 100.0).abs() < 1e-6);
            assert!((fitted.theta_hat.alpha() - a.theta_hat.alpha()).abs() < 1e-6);
            assert!((fitted.theta_hat.sigma() - a.theta_hat.sigma()).abs() < 1e-6);
        }
    }

    #[test]
    fn plug_in_echoes_fixed_values() {
        let bg = Dataset::new(vec![1.0, 2.0, 3.0, 2.5, 1.5]).unwrap();
        let sig = GnParams::new(2.0, 3.0, 2.0, 0.79).unwrap().sample(50, 1).unwrap();
        let res = plug_in_fit(&sig, &bg).unwrap();
        assert_eq!(res.theta_hat.mu(), bg.mean());
        assert_eq!(res.theta_hat.sigma(), bg.std_dev());
        assert_eq!(res.observed_info.shape(), (2, 2));
        assert!(plug_in_fit(&sig, &Dataset::new(vec![1.0]).unwrap()).is_err());
    }
}
