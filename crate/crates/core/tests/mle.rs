use gamma_normal::mle::{
    fit, identifiability_report, log_likelihood, observed_info, plug_in_fit, reduced_system_residual, score,
    sprott_residual, FitSpec, Param, Termination,
};
use gamma_normal::oracle::{fd_gradient, fd_hessian};
use gamma_normal::{Dataset, GnParams};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_case(rng: &mut ChaCha8Rng) -> (GnParams, Dataset) {
    let truth = GnParams::new(
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.3..8.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(0.3..3.0),
    )
    .unwrap();
    let data = truth.sample(rng.gen_range(20..80), rng.gen()).unwrap();
    // evaluate away from the generating point
    let theta = truth.to_array().map(|t| t * rng.gen_range(0.8..1.25));
    (GnParams::from_array(theta).unwrap(), data)
}

fn ll(data: &Dataset) -> impl Fn(&[f64; 4]) -> f64 + '_ {
    move |t| log_likelihood(&GnParams::from_array(*t).unwrap(), data).unwrap()
}

#[test]
fn score_agrees_with_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (p, data) = random_case(&mut rng);
        let an = score(&p, &data).unwrap();
        let fd = fd_gradient(ll(&data), p.to_array(), 1e-6);
        let scale = fd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            assert!((an[i] - fd[i]).abs() < 1e-5 * scale, "{p:?} component {i}: {} vs {}", an[i], fd[i]);
        }
    }
}

#[test]
fn information_agrees_with_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let (p, data) = random_case(&mut rng);
        let info = observed_info(&p, &data).unwrap();
        let h = fd_hessian(ll(&data), p.to_array(), 1e-4);
        let scale = info.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            for j in 0..4 {
                assert!((info[(i, j)] + h[i][j]).abs() < 1e-4 * scale, "{p:?} ({i},{j}): {} vs {}", info[(i, j)], -h[i][j]);
            }
        }
    }
}

#[test]
fn sprott_and_reduced_system_hold_at_four_free_estimate() {
    let truth = GnParams::new(1.0, 2.0, 0.0, 1.0).unwrap();
    let mut checked = 0;
    for seed in 0..6 {
        let data = truth.sample(200, seed).unwrap();
        let res = fit(&FitSpec::new(data.clone()).unwrap()).unwrap();
        if !res.converged {
            continue;
        }
        checked += 1;
        let zbar = data.mean();
        assert!(sprott_residual(&res, &data).abs() < 1e-6 * zbar.abs().max(1.0), "seed {seed}");
        let reduced = reduced_system_residual(&res.theta_hat, &data).unwrap();
        for (k, v) in reduced.iter().enumerate() {
            assert!(v.abs() < 1e-6, "seed {seed} equation {k}: {v}");
        }
    }
    assert!(checked >= 4, "only {checked} fits converged");
}

#[test]
fn printed_information_matrices_invert_to_printed_covariances() {
    let od = Matrix3::new(168.65, 83.67, 21.47, 83.67, 63.51, -25.44, 21.47, -25.44, 88.77);
    let od_cov = Matrix3::new(0.0502, -0.0802, -0.0351, -0.0802, 0.1459, 0.0612, -0.0351, 0.0612, 0.0373);
    let inv = od.try_inverse().unwrap();
    assert!((inv - od_cov).amax() < 2e-3, "{inv}");

    let en = Matrix3::new(326.92, -61.54, -16.01, -61.54, 33.68, -14.02, -16.01, -14.02, 42.63);
    let inv = en.try_inverse().unwrap();
    for (k, v) in [0.0060f64, 0.0660, 0.0348].into_iter().enumerate() {
        assert!((inv[(k, k)] - v).abs() < 2e-3, "diag {k}: {}", inv[(k, k)]);
    }
}

#[test]
fn od_chi2_regime_is_well_identified() {
    let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
    for seed in 0..5 {
        let data = truth.sample(100, 1000 + seed).unwrap();
        let res = fit(&FitSpec::new(data).unwrap().fix(Param::Alpha, 0.5).unwrap()).unwrap();
        assert!(res.converged, "seed {seed}: {:?}", res.termination);
        assert!(res.positive_definite);
        assert_eq!(res.observed_info.nrows(), 3);
        assert!(res.score_residual[0].abs() > 0.0 || res.free_mask[0]);
    }
}

#[test]
fn exponential_normal_regime_is_well_identified() {
    let truth = GnParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
    for seed in 0..5 {
        let data = truth.sample(100, 2000 + seed).unwrap();
        let res = fit(&FitSpec::new(data).unwrap().fix(Param::R, 1.0).unwrap()).unwrap();
        assert!(res.converged, "seed {seed}: {:?}", res.termination);
        assert!(res.positive_definite);
        assert!(res.standard_errors().iter().filter(|s| s.is_some()).count() == 3);
    }
}

#[test]
fn shape_is_negatively_correlated_with_location_and_scale() {
    let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
    let (mut mu_neg, mut sigma_neg, mut total) = (0, 0, 0);
    for seed in 0..20 {
        let data = truth.sample(100, 3000 + seed).unwrap();
        let res = fit(&FitSpec::new(data).unwrap().fix(Param::Alpha, 0.5).unwrap()).unwrap();
        if let (Some(a), Some(b)) = (res.covariance_entry(Param::R, Param::Mu), res.covariance_entry(Param::R, Param::Sigma)) {
            total += 1;
            mu_neg += (a < 0.0) as usize;
            sigma_neg += (b < 0.0) as usize;
        }
    }
    assert!(total >= 18);
    assert!(mu_neg * 10 >= total * 9, "{mu_neg}/{total}");
    assert!(sigma_neg * 10 >= total * 8, "{sigma_neg}/{total}");
}

#[test]
fn four_free_information_is_poorly_conditioned() {
    let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
    let data = truth.sample(100, 42).unwrap();
    let res = fit(&FitSpec::new(data).unwrap()).unwrap();
    let rep = identifiability_report(&res);
    assert_eq!(rep.eigenvalues.len(), 4);
    // the smallest eigenvalue sits orders of magnitude below the largest
    assert!(rep.eigen_ratio < 1e-2, "{rep:?}");
}

#[test]
fn plug_in_workflow_recovers_signal_shape() {
    // Background gives the normal component, the signal adds a gamma on top.
    let truth = GnParams::new(2.5, 6.7, 54.8, 7.7).unwrap();
    let mut bg_rng = ChaCha8Rng::seed_from_u64(77);
    let normal = rand_distr::Normal::new(54.8, 7.7).unwrap();
    let bg: Vec<f64> = (0..2000).map(|_| bg_rng.sample(normal)).collect();
    let background = Dataset::new(bg).unwrap();
    let signal = truth.sample(2000, 78).unwrap();
    let res = plug_in_fit(&signal, &background).unwrap();
    assert!(res.converged);
    assert_eq!(res.free_params(), vec![Param::Alpha, Param::R]);
    let se = res.standard_errors();
    let t = res.theta_hat;
    assert!((t.r() / t.alpha() - 6.7 / 2.5).abs() < 0.5, "{t:?}");
    assert!(se[0].is_some() && se[1].is_some());
    assert!(matches!(res.termination, Termination::Converged | Termination::Stationary));
}

#[test]
fn fitting_the_shifted_sample_shifts_the_location() {
    let truth = GnParams::new(1.0, 2.0, 0.0, 1.0).unwrap();
    let data = truth.sample(150, 9).unwrap();
    let moved = Dataset::new(data.values().iter().map(|v| v + 1000.0).collect()).unwrap();
    let spec = |d: Dataset| FitSpec::new(d).unwrap().fix(Param::Alpha, 1.0).unwrap();
    let a = fit(&spec(data)).unwrap();
    let b = fit(&spec(moved)).unwrap();
    assert!((b.theta_hat.mu() - a.theta_hat.mu() - 1000.0).abs() < 1e-5);
    assert!((b.theta_hat.r() - a.theta_hat.r()).abs() < 1e-6);
    assert!((b.log_likelihood - a.log_likelihood).abs() < 1e-6);
}
