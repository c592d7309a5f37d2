use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("capability missing: {0}")]
    Capability(String),

    #[error("degenerate control points: {0}")]
    DegenerateControls(String),

    #[error("degenerate landmark embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("invalid landmarks: {0}")]
    Landmarks(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    /// Stable short tag used as the machine-parsable prefix on CLI errors and
    /// mapped to integer codes by the C interface.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Capability(_) => "capability",
            Error::DegenerateControls(_) => "degenerate-controls",
            Error::DegenerateEmbedding(_) => "degenerate-embedding",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::EmptyRegion(_) => "empty-region",
            Error::Domain(_) => "domain",
            Error::Landmarks(_) => "landmarks",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}
