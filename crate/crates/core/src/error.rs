use thiserror::Error;

/// Errors raised by the models, solvers and metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample {index} is not strictly positive ({value})")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("simulation produced a non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("unstable dynamics: {0}")]
    Unstable(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("synthesis failed: {0}")]
    SynthesisFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
