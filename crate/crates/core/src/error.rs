use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input for {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{value} is outside the domain ({lo}, {hi})")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("root finder did not converge after {iterations} iterations (best iterate {best})")]
    RootNotConverged { best: f64, iterations: usize },

    #[error("quadrature did not converge: estimate {estimate} with error {error} after {evaluations} evaluations")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("finite-difference step underflows at x = {x} (scale {scale})")]
    StepUnderflow { x: f64, scale: f64 },

    #[error("distribution function is not monotone between theta = {a} and theta = {b}")]
    NonMonotone { a: f64, b: f64 },

    #[error("improper distribution: {0}")]
    Improper(String),

    #[error("log-likelihood is not concave at {theta} (second derivative {second})")]
    NonConcave { theta: f64, second: f64 },

    #[error("no interior stationary point in ({lo}, {hi})")]
    NoStationaryPoint { lo: f64, hi: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(x: f64, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
