use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum CutError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("conditioning event has zero probability")]
    ZeroProbabilityEvent,
    #[error("size bound exceeded: {0}")]
    SizeBound(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CutError>;
