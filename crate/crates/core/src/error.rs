use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every stage of the pipeline.
///
/// The coarse grouping (data / invalid input / shape / numerical) is what the
/// CLI maps onto process exit codes, so new variants should pick the bucket
/// that matches how a caller is supposed to react.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input data: unparseable cells, bad labels, column-count
    /// mismatches. `row` is 1-based and counts data rows as they appear in
    /// the file.
    #[error("data error in {path} at row {row}: {message}")]
    Data {
        path: PathBuf,
        row: usize,
        message: String,
    },

    /// A dataset-level problem that is not tied to a single row.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// A precondition on an operation's arguments was violated.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Matrix/vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Divergence, singular systems, empty selections: anything where the
    /// inputs were well-formed but the numerics gave up.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
