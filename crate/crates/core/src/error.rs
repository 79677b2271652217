use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands live in Grassmann algebras with different generator counts,
    /// or a requested generator/monomial does not exist.
    #[error("grassmann domain error: {0}")]
    GrassmannDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The (J, omega) pair does not define a Riemannian metric, J^2 != -1, etc.
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Malformed { path: PathBuf, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
