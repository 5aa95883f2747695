use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has nonzero mean (|mean| = {mean:e}); operator requires mean-zero data")]
    NonzeroMean { mean: f64 },
    #[error("quantity {kind} is not defined on a {dim}-dimensional grid")]
    KindMismatch { kind: String, dim: usize },
    #[error("input support index {support} exceeds the alias-free bound {limit}")]
    SupportTooLarge { support: usize, limit: usize },
    #[error("dense assembly of dimension {dim} exceeds capacity {cap}")]
    Capacity { dim: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("zero finding failed: {0}")]
    ZeroFinding(String),
    #[error("square-root branch failed: {0}")]
    Branch(String),
    #[error("malformed binary data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidArgument(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        LabError::Precondition(msg.into())
    }
}
