use thiserror::Error;

/// Errors reported by the laboratory routines.
#[derive(Debug, Error)]
pub enum QpError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("size error: largest safe term count is {largest_safe}")]
    Size { largest_safe: usize },

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("no convergence after {steps} steps (last delta {last_delta:.3e})")]
    Convergence { steps: usize, last_delta: f64 },

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("numerical quality: {0}")]
    NumericalQuality(String),

    #[error("wrong regime: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, QpError>;
