use thiserror::Error;

/// Errors raised by the verification toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("drift matrix is not antisymmetric (max |B_ij + B_ji| = {0:e})")]
    NotAntisymmetric(f64),

    #[error("empty onion: {0}")]
    EmptyOnion(String),

    #[error("two-onion inclusion violated: {0}")]
    LemmaViolation(String),

    #[error("Kalman condition violated: {0}")]
    KalmanViolation(String),

    #[error("the drift matrix has a trivial kernel; no exponential solutions exist")]
    TrivialKernel,
}

pub type Result<T> = std::result::Result<T, Error>;
