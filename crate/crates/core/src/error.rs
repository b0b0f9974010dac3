use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range. `name` is the parameter
    /// (and CLI flag) that was rejected.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: line {line}: {reason}")]
    FormatAt {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an I/O error so its message names the file.
    pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// True for errors the CLI reports with the usage exit code.
    pub fn is_parameter(&self) -> bool {
        matches!(self, Error::Parameter { .. })
    }
}
