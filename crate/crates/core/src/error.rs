use thiserror::Error;

#[derive(Debug, Error)]
pub enum HslError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("inconsistent predicate: converged at kappa={converged} but diverged at kappa={diverged}")]
    Inconsistency { converged: f64, diverged: f64 },

    #[error("no second solution: mountain-pass level {level:.3e} below threshold {beta:.3e}")]
    NoSecondSolution { level: f64, beta: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HslError>;
