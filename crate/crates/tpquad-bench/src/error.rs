//! Harness error type, split by exit-code category: configuration problems
//! exit with 1, runtime failures with 2.

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("length mismatch: {expected} vs {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("need at least {minimum} values, got {actual}")]
    TooFewValues { minimum: usize, actual: usize },

    #[error("singular matrix in metric computation: {0}")]
    SingularMatrix(String),

    #[error("core failure: {0}")]
    Core(#[from] tpquad::Error),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization failure: {0}")]
    Serde(String),
}

impl BenchError {
    /// Process exit code this error maps to.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
