use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("location ({x}, {y}) lies outside the field extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("kriging system is numerically singular")]
    SingularMatrix,

    #[error("negative kriging variance {0} beyond round-off tolerance")]
    NegativeVariance(f64),

    #[error("no unvisited reachable cell left to select")]
    Exhausted,

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("surrogate generation failed: {0}")]
    Generation(String),

    #[error("at cell ({i}, {j}): {source}")]
    AtCell {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("{path}: row {row}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("invalid config value `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Strips `AtCell` / `AtStep` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtCell { source, .. } | Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 for validation and parse failures, 2 for
    /// runtime and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InvalidArgument(_)
            | Error::OutOfBounds { .. }
            | Error::NotFound(_)
            | Error::Csv { .. }
            | Error::Schema { .. }
            | Error::ConfigParse(_)
            | Error::ConfigInvalid { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
