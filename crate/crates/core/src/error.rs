use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("state is not normalized: |norm - 1| = {0:e}")]
    Normalization(f64),
    #[error("representation mismatch: {0}")]
    Representation(String),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("grid does not resolve carrier frequency {omega}: need at least {required_steps} steps")]
    Resolution { omega: f64, required_steps: usize },
    #[error("pi-pulse calibration failed: {0}")]
    Calibration(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid objective: {0}")]
    Objective(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("state is not pure enough to extract a vector (purity {0})")]
    NotPure(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
