//! Command-line front end.
//!
//! Exit codes: `0` success, `1` usage or I/O error, `2` fit did not converge
//! (the report for the best iterate is still written).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::Dataset;
use crate::dist::{chi2_quantile, GnParams};
use crate::error::Error;
use crate::mle::{
    fit, identifiability_report, ks_test, plug_in_fit, sprott_residual, FitResult, FitSpec, Param,
};

#[derive(Debug, Parser)]
#[command(name = "gamma-normal", version, about = "Gamma-normal distribution: densities, quantiles, fitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Gn,
    En,
    Odchi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

/// Distribution parameters. `--sigma` is the normal standard deviation.
#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[arg(long, value_enum, default_value_t = DistKind::Gn)]
    pub dist: DistKind,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Degrees of freedom (odchi2 only; equivalent to r = nu/2).
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit of a sample file.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DistKind::Gn)]
        dist: DistKind,
        /// Hold a parameter fixed, e.g. `--fix mu=57.6`. Repeatable.
        #[arg(long = "fix", value_name = "NAME=VALUE")]
        fix: Vec<String>,
        /// Background sample: fix mu and sigma at its mean and standard deviation.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Score tolerance (default 1e-8·n).
        #[arg(long = "tol-score")]
        tol_score: Option<f64>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Json)]
        out: OutputFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Upper critical values of B(nu, 0, sigma²) plus the chi-squared reference row.
    Table {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0, 5.0, 10.0])]
        nu: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0])]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.9, 0.95, 0.99, 0.999])]
        p: Vec<f64>,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Csv)]
        out: OutputFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Quantiles at one or more probabilities.
    Quantile {
        #[command(flatten)]
        params: DistArgs,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// File of probabilities, one per line.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Text)]
        out: OutputFormat,
    },
    /// Density at the given points.
    Pdf {
        #[command(flatten)]
        params: DistArgs,
        #[arg(allow_hyphen_values = true)]
        points: Vec<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Text)]
        out: OutputFormat,
    },
    /// Cumulative probability at the given points.
    Cdf {
        #[command(flatten)]
        params: DistArgs,
        #[arg(allow_hyphen_values = true)]
        points: Vec<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Print the upper-tail probability 1 - F(z) instead.
        #[arg(long)]
        pvalue: bool,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Text)]
        out: OutputFormat,
    },
    /// Random sample, one value per line after a `#` header.
    Sample {
        #[command(flatten)]
        params: DistArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// One-sample Kolmogorov–Smirnov test of a sample file.
    Gof {
        input: PathBuf,
        #[command(flatten)]
        params: DistArgs,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Json)]
        out: OutputFormat,
    },
}

/// A command failure, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 1, message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("I/O error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Fit { input, dist, fix, background, tol_score, max_iter, out: fmt, output } => {
            let data = read_values(&input)?;
            let background = background.map(|p| read_values(&p)).transpose()?;
            let (code, text) = cmd_fit(&data, dist, &fix, background.as_ref(), tol_score, max_iter, fmt)?;
            emit(out, output.as_deref(), &text)?;
            Ok(code)
        }
        Command::Table { nu, sigma, p, out: fmt, output } => {
            let text = cmd_table(&nu, &sigma, &p, fmt)?;
            emit(out, output.as_deref(), &text)?;
            Ok(0)
        }
        Command::Quantile { params, p, input, out: fmt } => {
            let gn = resolve_params(&params)?;
            let mut probs = p;
            if let Some(path) = input {
                probs.extend(read_values(&path)?.values());
            }
            if probs.is_empty() {
                return Err(CliError::usage("no probabilities given (use --p or --input)"));
            }
            let rows = probs.iter().map(|&q| Ok((q, gn.quantile(q)?))).collect::<CliResult<Vec<_>>>()?;
            emit(out, None, &format_pairs("p", "quantile", &rows, fmt))?;
            Ok(0)
        }
        Command::Pdf { params, points, input, out: fmt } => {
            let gn = resolve_params(&params)?;
            let zs = collect_points(points, input)?;
            let rows = zs.iter().map(|&z| Ok((z, gn.pdf(z)?))).collect::<CliResult<Vec<_>>>()?;
            emit(out, None, &format_pairs("z", "pdf", &rows, fmt))?;
            Ok(0)
        }
        Command::Cdf { params, points, input, pvalue, out: fmt } => {
            let gn = resolve_params(&params)?;
            let zs = collect_points(points, input)?;
            let rows = zs
                .iter()
                .map(|&z| Ok((z, if pvalue { gn.sf(z)? } else { gn.cdf(z)? })))
                .collect::<CliResult<Vec<_>>>()?;
            emit(out, None, &format_pairs("z", if pvalue { "pvalue" } else { "cdf" }, &rows, fmt))?;
            Ok(0)
        }
        Command::Sample { params, n, seed, output } => {
            let gn = resolve_params(&params)?;
            let data = gn.sample(n, seed)?;
            let mut text = format!(
                "# gamma-normal sample: alpha={} r={} mu={} sigma={} n={} seed={}\n",
                gn.alpha(),
                gn.r(),
                gn.mu(),
                gn.sigma(),
                n,
                seed
            );
            for v in data.values() {
                text.push_str(&format!("{v:.17e}\n"));
            }
            emit(out, output.as_deref(), &text)?;
            Ok(0)
        }
        Command::Gof { input, params, out: fmt } => {
            let gn = resolve_params(&params)?;
            let data = read_values(&input)?;
            let ks = ks_test(&data, &gn)?;
            let text = match fmt {
                OutputFormat::Json => {
                    let v = json!({"n": data.len(), "statistic": ks.statistic, "p_value": ks.p_value});
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("serialisable"))
                }
                OutputFormat::Csv => format!("n,statistic,p_value\n{},{},{}\n", data.len(), ks.statistic, ks.p_value),
                OutputFormat::Text => format!("n = {}\nD_N = {:.6}\np = {:.6}\n", data.len(), ks.statistic, ks.p_value),
            };
            emit(out, None, &text)?;
            Ok(0)
        }
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Reads one value per line. Blank lines and `#` comments are skipped, and a
/// single non-numeric first line is treated as a header.
pub fn parse_values(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut values = Vec::new();
    let mut seen_content = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if !seen_content => {}
            Err(_) => return Err(format!("line {}: cannot parse '{line}' as a number", lineno + 1)),
        }
        seen_content = true;
    }
    Ok(values)
}

fn read_values(path: &Path) -> CliResult<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let values = parse_values(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if values.is_empty() {
        return Err(CliError::usage(format!("{}: no values", path.display())));
    }
    Ok(Dataset::new(values)?)
}

fn collect_points(mut points: Vec<f64>, input: Option<PathBuf>) -> CliResult<Vec<f64>> {
    if let Some(path) = input {
        points.extend(read_values(&path)?.values());
    }
    if points.is_empty() {
        return Err(CliError::usage("no evaluation points given"));
    }
    Ok(points)
}

/// Builds `GN` parameters from the flags of the chosen family.
pub fn resolve_params(a: &DistArgs) -> CliResult<GnParams> {
    let mu = a.mu.unwrap_or(0.0);
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::usage(format!("--{name} is required for --dist {:?}", a.dist).to_lowercase()));
    let p = match a.dist {
        DistKind::Gn => {
            if a.nu.is_some() {
                return Err(CliError::usage("--nu applies only to --dist odchi2"));
            }
            GnParams::new(need(a.alpha, "alpha")?, need(a.r, "r")?, mu, need(a.sigma, "sigma")?)?
        }
        DistKind::En => {
            if a.r.is_some_and(|r| r != 1.0) || a.nu.is_some() {
                return Err(CliError::usage("--dist en has r = 1; do not pass --r or --nu"));
            }
            GnParams::new(need(a.alpha, "alpha")?, 1.0, mu, need(a.sigma, "sigma")?)?
        }
        DistKind::Odchi2 => {
            if a.alpha.is_some_and(|x| x != 0.5) {
                return Err(CliError::usage("--dist odchi2 has alpha = 1/2; do not pass --alpha"));
            }
            let r = match (a.nu, a.r) {
                (Some(nu), None) => 0.5 * nu,
                (None, Some(r)) => r,
                (Some(nu), Some(r)) if r == 0.5 * nu => r,
                (Some(_), Some(_)) => return Err(CliError::usage("--nu and --r disagree")),
                (None, None) => return Err(CliError::usage("--nu is required for --dist odchi2")),
            };
            GnParams::new(0.5, r, mu, need(a.sigma, "sigma")?)?
        }
    };
    Ok(p)
}

fn parse_fixes(dist: DistKind, fixes: &[String]) -> CliResult<BTreeMap<&'static str, (Param, f64)>> {
    let mut out = BTreeMap::new();
    for f in fixes {
        let (name, value) = f
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--fix expects NAME=VALUE, got '{f}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("--fix {name}: '{value}' is not a number")))?;
        let (param, value) = match name.trim().to_ascii_lowercase().as_str() {
            "nu" if dist == DistKind::Odchi2 => (Param::R, 0.5 * value),
            "nu" => return Err(CliError::usage("fixing nu is only valid with --dist odchi2")),
            other => (other.parse::<Param>().map_err(|e| CliError::usage(e.to_string()))?, value),
        };
        match (dist, param) {
            (DistKind::En, Param::R) => return Err(CliError::usage("--dist en already fixes r = 1")),
            (DistKind::Odchi2, Param::Alpha) => {
                return Err(CliError::usage("--dist odchi2 already fixes alpha = 1/2"))
            }
            _ => {}
        }
        out.insert(param.name(), (param, value));
    }
    Ok(out)
}

fn cmd_fit(
    data: &Dataset,
    dist: DistKind,
    fixes: &[String],
    background: Option<&Dataset>,
    tol_score: Option<f64>,
    max_iter: usize,
    fmt: OutputFormat,
) -> CliResult<(i32, String)> {
    let mut fixed = parse_fixes(dist, fixes)?;
    match dist {
        DistKind::En => {
            fixed.insert("r", (Param::R, 1.0));
        }
        DistKind::Odchi2 => {
            fixed.insert("alpha", (Param::Alpha, 0.5));
        }
        DistKind::Gn => {}
    }
    if let Some(bg) = background {
        if bg.len() < 2 || bg.is_degenerate() {
            return Err(CliError::usage("background sample needs at least two distinct values"));
        }
        fixed.insert("mu", (Param::Mu, bg.mean()));
        fixed.insert("sigma", (Param::Sigma, bg.std_dev()));
    }
    let result = if let (Some(bg), DistKind::Gn, true) = (background, dist, fixes.is_empty()) {
        plug_in_fit(data, bg)?
    } else {
        let mut spec = FitSpec::new(data.clone())?.with_max_iter(max_iter);
        for (param, value) in fixed.values() {
            spec = spec.fix(*param, *value)?;
        }
        if let Some(t) = tol_score {
            spec = spec.with_score_tol(t);
        }
        fit(&spec)?
    };
    let report = fit_report(data, dist, &result)?;
    let text = match fmt {
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&report).expect("serialisable")),
        OutputFormat::Csv => fit_csv(&result),
        OutputFormat::Text => fit_text(&result, &report),
    };
    Ok((if result.converged { 0 } else { 2 }, text))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| finite_or_null(m[(i, j)])).collect())).collect())
}

/// The JSON report for a fit; its field set does not depend on the outcome.
pub fn fit_report(data: &Dataset, dist: DistKind, result: &FitResult) -> CliResult<Value> {
    let t = &result.theta_hat;
    let free: Vec<&str> = result.free_params().iter().map(|p| p.name()).collect();
    let se = result.standard_errors();
    let mut notes: Vec<String> = Vec::new();
    let mut se_json = serde_json::Map::new();
    for p in Param::ALL {
        let v = match se[p.index()] {
            Some(s) => json!(s),
            None if !result.free_mask[p.index()] => Value::Null,
            None => {
                notes.push(format!("standard error of {p} unavailable: covariance diagonal not positive"));
                Value::Null
            }
        };
        se_json.insert(p.name().to_string(), v);
    }
    let covariance = match &result.covariance {
        Some(c) => matrix_json(c),
        None => {
            notes.push("covariance unavailable: observed information is singular".into());
            Value::Null
        }
    };
    let diag = identifiability_report(result);
    let ks = ks_test(data, t)?;
    let zbar = data.mean() + data.shift();
    let mut score = serde_json::Map::new();
    for p in Param::ALL {
        score.insert(p.name().to_string(), finite_or_null(result.score_residual[p.index()]));
    }
    Ok(json!({
        "dist": format!("{dist:?}").to_lowercase(),
        "n": result.n,
        "free": free,
        "theta_hat": {
            "alpha": t.alpha(), "r": t.r(), "mu": t.mu(), "sigma": t.sigma(),
            "sigma2": t.sigma2(), "nu": t.nu(),
        },
        "standard_errors": se_json,
        "covariance": covariance,
        "observed_info": matrix_json(&result.observed_info),
        "eigenvalues": result.eigenvalues.iter().map(|&e| finite_or_null(e)).collect::<Vec<_>>(),
        "determinant": finite_or_null(result.determinant),
        "scaled_determinant": finite_or_null(diag.scaled_determinant),
        "condition_number": finite_or_null(diag.condition_number),
        "positive_definite": result.positive_definite,
        "near_singular": diag.near_singular,
        "sprott": {
            "residual": sprott_residual(result, data),
            "alpha": finite_or_null(t.r() / (zbar - t.mu())),
            "r": (zbar - t.mu()) * t.alpha(),
        },
        "log_likelihood": finite_or_null(result.log_likelihood),
        "ks": { "statistic": ks.statistic, "p_value": ks.p_value },
        "convergence": {
            "converged": result.converged,
            "termination": result.termination,
            "iterations": result.iterations,
            "score_residual": score,
        },
        "notes": notes,
    }))
}

fn fit_csv(result: &FitResult) -> String {
    let se = result.standard_errors();
    let theta = result.theta_hat.to_array();
    let mut s = String::from("param,estimate,std_error,free\n");
    for p in Param::ALL {
        let e = se[p.index()].map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", p.name(), theta[p.index()], e, result.free_mask[p.index()]));
    }
    s
}

fn fit_text(result: &FitResult, report: &Value) -> String {
    let se = result.standard_errors();
    let theta = result.theta_hat.to_array();
    let mut s = String::new();
    for p in Param::ALL {
        match se[p.index()] {
            Some(e) => s.push_str(&format!("{:<6} = {:>12.6} ± {:.6}\n", p.name(), theta[p.index()], e)),
            None if result.free_mask[p.index()] => s.push_str(&format!("{:<6} = {:>12.6} (no s.e.)\n", p.name(), theta[p.index()])),
            None => s.push_str(&format!("{:<6} = {:>12.6} (fixed)\n", p.name(), theta[p.index()])),
        }
    }
    s.push_str(&format!("log-likelihood = {:.6}\n", result.log_likelihood));
    s.push_str(&format!("eigenvalues = {:?}\n", result.eigenvalues));
    s.push_str(&format!("determinant = {:.6e}, positive definite: {}\n", result.determinant, result.positive_definite));
    s.push_str(&format!("Sprott residual = {:.3e}\n", report["sprott"]["residual"].as_f64().unwrap_or(f64::NAN)));
    s.push_str(&format!(
        "KS D_N = {:.4}, p = {:.4}\n",
        report["ks"]["statistic"].as_f64().unwrap_or(f64::NAN),
        report["ks"]["p_value"].as_f64().unwrap_or(f64::NAN)
    ));
    s.push_str(&format!("converged: {} ({:?}, {} iterations)\n", result.converged, result.termination, result.iterations));
    s
}

/// One cell of the critical-value table; `sigma == None` is the chi-squared row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCell {
    pub p: f64,
    pub sigma: Option<f64>,
    pub nu: f64,
    pub quantile: f64,
}

/// Computes the table in `p`, then `sigma` (chi-squared last), then `nu` order.
pub fn critical_values(nus: &[f64], sigmas: &[f64], ps: &[f64]) -> crate::Result<Vec<TableCell>> {
    let mut cells = Vec::new();
    for &p in ps {
        for s in sigmas.iter().map(|&s| Some(s)).chain(std::iter::once(None)) {
            for &nu in nus {
                cells.push((p, s, nu));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(p, sigma, nu)| {
            let quantile = match sigma {
                Some(s) => GnParams::new(0.5, 0.5 * nu, 0.0, s)?.quantile(p)?,
                None => chi2_quantile(nu, p)?,
            };
            Ok(TableCell { p, sigma, nu, quantile })
        })
        .collect()
}

fn cmd_table(nus: &[f64], sigmas: &[f64], ps: &[f64], fmt: OutputFormat) -> CliResult<String> {
    if nus.is_empty() || sigmas.is_empty() || ps.is_empty() {
        return Err(CliError::usage("table needs at least one value each of --nu, --sigma and --p"));
    }
    let cells = critical_values(nus, sigmas, ps)?;
    let label = |s: Option<f64>| s.map(|v| v.to_string()).unwrap_or_else(|| "chi2".into());
    Ok(match fmt {
        OutputFormat::Csv => {
            let mut s = String::from("p,sigma,nu,quantile\n");
            for c in &cells {
                s.push_str(&format!("{},{},{},{:.6}\n", c.p, label(c.sigma), c.nu, c.quantile));
            }
            s
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| json!({"p": c.p, "sigma": c.sigma, "nu": c.nu, "quantile": c.quantile}))
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&rows).expect("serialisable"))
        }
        OutputFormat::Text => {
            let mut s = String::new();
            for &p in ps {
                s.push_str(&format!("p = {p}\n{:>8}", "sigma"));
                for nu in nus {
                    s.push_str(&format!("{:>10}", nu));
                }
                s.push('\n');
                for sig in sigmas.iter().map(|&x| Some(x)).chain(std::iter::once(None)) {
                    s.push_str(&format!("{:>8}", label(sig)));
                    for c in cells.iter().filter(|c| c.p == p && c.sigma == sig) {
                        s.push_str(&format!("{:>10.3}", c.quantile));
                    }
                    s.push('\n');
                }
                s.push('\n');
            }
            s
        }
    })
}

fn format_pairs(xname: &str, yname: &str, rows: &[(f64, f64)], fmt: OutputFormat) -> String {
    match fmt {
        OutputFormat::Text => rows.iter().map(|(_, y)| format!("{y}\n")).collect(),
        OutputFormat::Csv => {
            let mut s = format!("{xname},{yname}\n");
            for (x, y) in rows {
                s.push_str(&format!("{x},{y}\n"));
            }
            s
        }
        OutputFormat::Json => {
            let v: Vec<Value> = rows.iter().map(|(x, y)| json!({ xname: x, yname: y })).collect();
            format!("{}\n", serde_json::to_string_pretty(&v).expect("serialisable"))
        }
    }
}
