use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("layer mismatch: expected {expected} layers, got {got}")]
    LayerMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("divergence at step {step}: parameter norm {norm:e} exceeds guard {limit:e}")]
    Divergence { step: u64, norm: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("no calibration constant for {0}; run `sam-balance verify --suite calibration` first")]
    MissingCalibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration problems are user errors (CLI exit code 2); the rest are
    /// run failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Dimension(_) | Error::LayerMismatch { .. } | Error::Json(_))
    }
}
