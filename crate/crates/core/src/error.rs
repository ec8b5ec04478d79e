use thiserror::Error;

/// Errors raised by estimator families, bounds and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A tuning value, parameter or input lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs disagree on shape or violate a documented precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// The SURE surface is not strictly convex in the tuning parameter at the minimizer.
    #[error("nonpositive curvature {curvature:e} of the SURE criterion at s = {s}")]
    Curvature { s: f64, curvature: f64 },

    /// The supplied tuning value is not a stationary point of the SURE criterion.
    #[error("SURE derivative {gradient:e} exceeds tolerance {tolerance:e} at s = {s}")]
    Stationarity { s: f64, gradient: f64, tolerance: f64 },

    /// Exhaustive enumeration refused because the problem is too large.
    #[error("refusing exhaustive search over 2^{p} subsets (limit 2^{limit})")]
    TooLarge { p: usize, limit: usize },

    /// A malformed configuration line.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
