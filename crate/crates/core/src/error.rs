use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty sample selection")]
    EmptySelection,
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("numerical blow-up at step {step}")]
    BlowUp { step: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("requested rank {requested} exceeds maximum {max}")]
    RankTooLarge { requested: usize, max: usize },
    #[error("all-zero data: leading singular value is zero")]
    ZeroData,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("system is not linear (superposition residual {residual:e})")]
    Nonlinear { residual: f64 },
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
