//! The gamma–normal distribution `GN(α, r, μ, σ²)`: the law of `X + Y` with
//! `X ~ Gamma(rate α, shape r)` and independent `Y ~ N(μ, σ²)`.
//!
//! The density has the closed form
//!
//! ```text
//! f(z) = (ασ)^r / √(2πσ²) · D_{-r}(ζ) · E(z),   ζ = ασ + (μ - z)/σ,
//! ln E(z) = ζ²/4 - (z - μ)²/(2σ²)
//! ```
//!
//! with `D_{-r}` a parabolic cylinder function. The crate provides
//!
//! * [`specfun`]: overflow-safe parabolic cylinder functions and their
//!   derivatives, plus erf/log-gamma/digamma/trigamma;
//! * [`dist`]: density, CDF, quantiles, moments and sampling, with the
//!   exponential–normal (`r = 1`) and overdispersed chi-squared (`α = 1/2`)
//!   special cases;
//! * [`mle`]: analytic score and observed information, a damped Newton
//!   fitter, covariance and identifiability diagnostics, and the
//!   Kolmogorov–Smirnov test;
//! * [`oracle`]: brute-force reference implementations used to cross-check
//!   the closed forms;
//! * [`cli`]: the command-line front end.

// NaN-rejecting comparisons like `!(x > 0.0)` are intended, and reference
// constants keep every published digit.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
mod data;
pub mod dist;
mod error;
pub mod mle;
pub mod oracle;
pub mod specfun;

pub use data::Dataset;
pub use dist::{EnParams, GnParams, Moments, OdChi2Params};
pub use error::{Error, Result};
pub use mle::{FitResult, FitSpec, Param};
