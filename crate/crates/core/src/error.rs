use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the training laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at row {row}, column {col}: {context}")]
    Numeric {
        row: usize,
        col: usize,
        context: String,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("grid too coarse: {mass:.3e} of the Gibbs mass sits in the boundary bins (limit {limit:.1e})")]
    GridTooCoarse { mass: f64, limit: f64 },

    #[error("training diverged at consumed={consumed} ({stage}): {detail}")]
    Training {
        consumed: u64,
        stage: String,
        detail: String,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
