use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column} ({name}): cannot read {value:?} as a number")]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        /// 1-based column index.
        column: usize,
        name: String,
        value: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate coordinate range for {0}: min equals max")]
    DegenerateRange(&'static str),

    #[error("stratification error: floor {floor} has {count} sample(s), need at least 2")]
    Stratification { floor: u32, count: usize },

    #[error("insufficient samples: {needed} required, {got} available")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("exhaustive search refused for n = {n} (limit {limit}); use the sa or sqa sampler instead")]
    TooLarge { n: usize, limit: usize },

    #[error("solver failure: {0}")]
    Solver(String),
}

/// Broad failure classes, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Solver,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::TooLarge { .. } => ErrorKind::Config,
            Error::Solver(_) => ErrorKind::Solver,
            _ => ErrorKind::Data,
        }
    }
}
