use std::io;

use thiserror::Error;

/// Errors produced by the simulation and classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("level {level} has zero total out-rate (absorbing state)")]
    AbsorbingState { level: usize },

    #[error("beta calibration failed: {0}")]
    Calibration(String),

    #[error("input length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("labels must contain both bright and dark examples")]
    MissingClass,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
