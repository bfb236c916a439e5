use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },

    #[error("{op} did not converge after {iters} iterations")]
    Convergence { op: &'static str, iters: usize },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Numeric { epoch: usize, step: usize },

    #[error("prior estimation bank is empty")]
    EmptyBank,

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    /// True for errors caused by user input (configuration, files, arguments)
    /// rather than by a failure during computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Format { .. } | Error::Dataset(_) | Error::Io(_)
        )
    }
}
