use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrkaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
    #[error("singular triangular factor at diagonal {index}")]
    SingularFactor { index: usize },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("provider has no block structure")]
    NoBlocks,
    #[error("singular value decomposition failed")]
    SvdFailed,
    #[error("serialization: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{aborted} of {total} trials aborted")]
    TooManyAborts { aborted: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, OrkaError>;

impl From<std::io::Error> for OrkaError {
    fn from(e: std::io::Error) -> Self {
        OrkaError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for OrkaError {
    fn from(e: serde_json::Error) -> Self {
        OrkaError::Format(e.to_string())
    }
}
