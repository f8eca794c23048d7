use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent arguments (length mismatch, empty input, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A solver or experiment configuration that violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Data with no spread where a scale has to be estimated.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no central root in [{lo}, {hi}]")]
    NoCentralRoot { lo: f64, hi: f64 },

    #[error("non-unique central root in [{lo}, {hi}]: {sign_changes} sign changes")]
    NonUniqueRoot {
        lo: f64,
        hi: f64,
        sign_changes: usize,
    },

    #[error("estimator `{0}` is reserved but not implemented")]
    Unimplemented(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoCentralRoot { .. } | Error::NonUniqueRoot { .. } | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
