use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gamma_normal::GnParams;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamma-normal")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

// Final comma- or whitespace-separated field of the output.
fn last_number(o: &Output) -> f64 {
    stdout(o).split(|c: char| c == ',' || c.is_whitespace()).rfind(|s| !s.is_empty()).unwrap().parse().unwrap()
}

fn write_sample(dir: &Path, name: &str, p: &GnParams, n: usize, seed: u64) -> String {
    let path = dir.join(name);
    let body: String = p.sample(n, seed).unwrap().values().iter().map(|v| format!("{v}\n")).collect();
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn table_single_cell() {
    let o = run(&["table", "--nu", "5", "--sigma", "2", "--p", "0.99"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,sigma,nu,quantile"));
    let cell: Vec<&str> = lines.find(|l| l.contains(",2,")).unwrap().split(',').collect();
    let q: f64 = cell[3].parse().unwrap();
    assert!((q - 15.880).abs() < 0.005, "{q}");
}

#[test]
fn cdf_and_pvalue() {
    let o = run(&["cdf", "--dist", "odchi2", "--nu", "1", "--sigma", "1", "4.163"]);
    assert_eq!(o.status.code(), Some(0));
    let v = last_number(&o);
    assert!((v - 0.95).abs() < 5e-4, "{v}");

    let o = run(&["cdf", "--dist", "odchi2", "--nu", "1", "--sigma", "1", "--pvalue", "4.163"]);
    let v = last_number(&o);
    assert!((v - 0.05).abs() < 5e-4, "{v}");
}

#[test]
fn quantile_matches_table() {
    let o = run(&["quantile", "--dist", "odchi2", "--p", "0.999", "--nu", "10", "--sigma", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v = last_number(&o);
    assert!((v - 33.984).abs() < 0.005, "{v}");
}

#[test]
fn pdf_equals_library_value() {
    let o = run(&["pdf", "--alpha", "0.7", "--r", "2.5", "--mu", "1", "--sigma", "0.8", "--out", "csv", "3.25"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let last = text.lines().next_back().unwrap();
    let v: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    let lib = GnParams::new(0.7, 2.5, 1.0, 0.8).unwrap().pdf(3.25).unwrap();
    assert_eq!(v, lib);
}

#[test]
fn sample_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = run(&["sample", "--alpha", "0.5", "--r", "0.5", "--mu", "5", "--sigma", "1", "--n", "500", "--seed", "7", "--output", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with('#'));
    assert!(text.lines().next().unwrap().contains("seed"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 500);
}

#[test]
fn sample_mean_matches_theory() {
    let o = run(&["sample", "--alpha", "0.5", "--r", "2", "--mu", "1", "--sigma", "1", "--n", "100000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let vals: Vec<f64> = stdout(&o).lines().filter(|l| !l.starts_with('#')).map(|l| l.trim().parse().unwrap()).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = ((1.0 + 2.0 / 0.25) / n).sqrt();
    assert!((mean - 5.0).abs() < 3.0 * se, "{mean}");
}

#[test]
fn zero_sample_size_is_refused() {
    let o = run(&["sample", "--alpha", "1", "--r", "1", "--mu", "0", "--sigma", "1", "--n", "0", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn empty_input_is_refused_without_report() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.csv");
    fs::write(&path, "").unwrap();
    let o = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_file_and_bad_flags_exit_one() {
    assert_eq!(run(&["fit", "/nonexistent/values.csv"]).status.code(), Some(1));
    assert_eq!(run(&["quantile", "--p", "1.5", "--alpha", "1", "--r", "1", "--sigma", "1"]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--dist", "en", "--fix", "r=2", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn od_chi2_fit_report() {
    let dir = TempDir::new().unwrap();
    let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
    let path = write_sample(dir.path(), "b.csv", &truth, 100, 12);
    let o = run(&["fit", "--dist", "odchi2", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dist"], "odchi2");
    assert_eq!(v["free"], serde_json::json!(["r", "mu", "sigma"]));
    assert_eq!(v["theta_hat"]["alpha"], 0.5);
    for (name, parent) in [("r", 0.5), ("mu", 5.0), ("sigma", 1.0)] {
        let est = v["theta_hat"][name].as_f64().unwrap();
        let se = v["standard_errors"][name].as_f64().unwrap();
        assert!((est - parent).abs() < 3.0 * se, "{name}: {est} ± {se}");
    }
    assert_eq!(v["covariance"].as_array().unwrap().len(), 3);
    assert_eq!(v["convergence"]["converged"], true);
    for key in ["eigenvalues", "determinant", "positive_definite", "sprott", "log_likelihood", "ks"] {
        assert!(!v[key].is_null(), "{key}");
    }
    let nu = v["theta_hat"]["nu"].as_f64().unwrap();
    assert!((nu - 2.0 * v["theta_hat"]["r"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn plug_in_style_fit_gives_two_by_two_covariance() {
    let dir = TempDir::new().unwrap();
    let truth = GnParams::new(2.5, 6.7, 57.6, 7.8).unwrap();
    let path = write_sample(dir.path(), "signal.csv", &truth, 500, 4);
    let o = run(&["fit", "--dist", "gn", "--fix", "mu=57.6", "--fix", "sigma=7.8", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let cov = v["covariance"].as_array().unwrap();
    assert_eq!(cov.len(), 2);
    assert_eq!(cov[0].as_array().unwrap().len(), 2);
    assert_eq!(v["theta_hat"]["mu"], 57.6);
    assert!(v["standard_errors"]["mu"].is_null());
}

#[test]
fn non_convergence_still_reports() {
    let dir = TempDir::new().unwrap();
    let truth = GnParams::new(0.5, 0.5, 5.0, 1.0).unwrap();
    let path = write_sample(dir.path(), "b.csv", &truth, 100, 12);
    let o = run(&["fit", "--max-iter", "1", &path]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["convergence"]["converged"], false);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn report_can_be_written_to_a_file_and_as_text() {
    let dir = TempDir::new().unwrap();
    let truth = GnParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
    let path = write_sample(dir.path(), "e.csv", &truth, 150, 21);
    let out = dir.path().join("report.json");
    let o = run(&["fit", "--dist", "en", &path, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["theta_hat"]["r"], 1.0);

    let o = run(&["fit", "--dist", "en", &path, "--out", "csv"]);
    assert!(stdout(&o).starts_with("param,estimate,std_error,free"));
    let o = run(&["fit", "--dist", "en", &path, "--out", "text"]);
    assert!(stdout(&o).contains("alpha"));
}

#[test]
fn input_with_comments_and_header() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pts.csv");
    fs::write(&path, "# evaluation points\nz\n0.5\n\n1.5\n").unwrap();
    let o = run(&["pdf", "--alpha", "1", "--r", "1", "--mu", "0", "--sigma", "1", "--input", path.to_str().unwrap(), "--out", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 2);
}

#[test]
fn gof_reports_ks() {
    let dir = TempDir::new().unwrap();
    let truth = GnParams::new(1.0, 2.0, 0.0, 1.0).unwrap();
    let path = write_sample(dir.path(), "g.csv", &truth, 300, 5);
    let o = run(&["gof", &path, "--alpha", "1", "--r", "2", "--mu", "0", "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["p_value"].as_f64().unwrap() > 0.001, "{v}");
}
