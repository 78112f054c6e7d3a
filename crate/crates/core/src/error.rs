use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Distribution parameters violate their constraints.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// Probability outside the open unit interval.
    #[error("probability {0} is not in (0, 1)")]
    InvalidProbability(f64),

    /// Adaptive quadrature hit its subdivision limit before meeting the tolerance.
    #[error("quadrature did not converge: achieved relative error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    /// Convolution of two gamma-normal laws requires a shared rate.
    #[error("cannot convolve: alpha {0} != alpha {1}")]
    MismatchedAlpha(f64, f64),

    /// Dataset is empty or contains non-finite values.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// All observations are identical, so the information matrix is undefined.
    #[error("degenerate dataset: all {0} values are equal")]
    DegenerateData(usize),

    /// Fit specification is inconsistent.
    #[error("invalid fit specification: {0}")]
    InvalidFitSpec(String),

    /// Root bracketing failed.
    #[error("could not bracket root: {0}")]
    Bracketing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
