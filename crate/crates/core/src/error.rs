use std::path::PathBuf;

use thiserror::Error;
use vehreid_tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid architecture: {0}")]
    Spec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("label spaces differ: index built for {expected}, checkpoints give {found}")]
    Incompatible { expected: String, found: String },
    #[error("unknown {kind} {name:?}; closest entries: {}", .suggestions.join(", "))]
    Name {
        kind: &'static str,
        name: String,
        suggestions: Vec<String>,
    },
    #[error("classes without samples: {0:?}")]
    MissingClass(Vec<usize>),
    #[error("class {0} has a zero mean descriptor")]
    DegenerateCentroid(usize),
    #[error("residual error reduction undefined when the baseline accuracy is 1")]
    UndefinedReduction,
    #[error("image error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
