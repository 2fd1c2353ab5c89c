use std::path::PathBuf;

use thiserror::Error;

/// Broad category of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller asked for something invalid (bad arguments, out-of-range index).
    Usage,
    /// Input data is missing, malformed, degenerate or inconsistent with other inputs.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed model file {path}: {source}")]
    ModelFile {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("wav error in {path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("singular resonance system (dimension {dim}) even after ridge {ridge:e}")]
    SingularSystem { dim: usize, ridge: f64 },
    #[error("reflection row {row} collapsed to zero again after re-initialisation (iteration {iteration})")]
    DegenerateRow { row: usize, iteration: usize },
    #[error("index {index} out of range for {len} directions")]
    IndexOutOfRange { index: usize, len: usize },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::IndexOutOfRange { .. } => ErrorKind::Usage,
            Error::SingularSystem { .. } | Error::DegenerateRow { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
