use thiserror::Error;

/// Errors raised by the estimation and simulation primitives.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("propensity {0} outside the open interval (0, 1)")]
    PropensityOutOfRange(f64),

    #[error("non-finite decision score; the running estimates have diverged")]
    NonFiniteScore,

    #[error("degenerate factor pair: {0}")]
    DegenerateFactor(String),

    #[error("variance estimate must be positive, got sigma_hat = {sigma_hat}, s_hat = {s_hat}")]
    NonPositiveVariance { sigma_hat: f64, s_hat: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("numerical routine failed: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("too many failed trials: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A trial failure with the step index at which it occurred, when known.
#[derive(Debug, Error)]
#[error("trial {trial} failed{}: {source}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
pub struct TrialError {
    pub trial: usize,
    pub step: Option<usize>,
    #[source]
    pub source: Error,
}
