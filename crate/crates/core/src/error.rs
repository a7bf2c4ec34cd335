use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("mode index {mode} out of range for {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation overflow: leakage {leakage:.3e} exceeds tolerance {tol:.3e}")]
    TruncationOverflow { leakage: f64, tol: f64 },

    #[error("invalid channel: completeness violated by {deviation:.3e}")]
    InvalidChannel { deviation: f64 },

    #[error("dimension budget exceeded: {dim} > {budget}")]
    BudgetExceeded { dim: usize, budget: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unattainable augmentation factor {requested}; attainable: {attainable}")]
    UnattainableFactor { requested: usize, attainable: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
