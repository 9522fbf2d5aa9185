use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown similarity algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("unknown attribute `{attribute}`{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownAttribute { attribute: String, line: Option<usize> },

    #[error("empty canonical list")]
    EmptyCanonicals,

    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    LengthMismatch(usize, usize),

    #[error("cosine undefined for a zero vector")]
    ZeroVector,

    #[error("cannot embed an empty token sequence")]
    EmptyText,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("bad model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
