use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the registration engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("unsupported topology at line {line}: {message}")]
    UnsupportedTopology { line: usize, message: String },

    #[error("non-manifold edge ({0}, {1}) has more than two incident faces")]
    NonManifold(usize, usize),

    #[error("index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("vertex {0} is listed both as a landmark and as non-interested")]
    ClassConflict(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("underdetermined fit: {0} point pairs given, at least 3 required")]
    Underdetermined(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("factorization failed at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("meshes do not share topology")]
    TopologyMismatch,

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
