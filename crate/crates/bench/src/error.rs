use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] cobras::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Numerical(cobras::Error::Io(_) | cobras::Error::Csv(_) | cobras::Error::Json(_)) => 1,
            BenchError::Numerical(_) => 3,
            BenchError::Io(_) => 1,
        }
    }
}
