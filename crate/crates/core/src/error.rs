//! Crate-wide error type with a stable mapping to CLI exit codes.

use std::path::PathBuf;

/// Errors produced anywhere in the pipeline or the evaluation harness.
///
/// Variants map onto process exit codes: validation failures exit 1,
/// transport failures exit 2, parse failures exit 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition or invariant was violated by the caller or by data on disk.
    #[error("validation: {0}")]
    Validation(String),

    /// A backend could not be reached or kept failing after retries.
    #[error("transport: {0}")]
    Transport(String),

    /// A completion or a file could not be parsed into the expected shape.
    #[error("parse: {message}")]
    Parse {
        message: String,
        /// The raw text that failed to parse, kept for operator inspection.
        raw: Option<String>,
    },

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn transport(msg: impl Into<String>) -> Self {
        Error::Transport(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            message: msg.into(),
            raw: None,
        }
    }

    pub fn parse_with_raw(msg: impl Into<String>, raw: impl Into<String>) -> Self {
        Error::Parse {
            message: msg.into(),
            raw: Some(raw.into()),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code for the CLI: 1 validation, 2 transport, 3 parse.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Io { .. } => 1,
            Error::Transport(_) => 2,
            Error::Parse { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
