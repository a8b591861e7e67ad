//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IcaError>;

#[derive(Debug, Error)]
pub enum IcaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rank-deficient input: eigenvalue {eigenvalue:e} is not positive")]
    RankDeficient { eigenvalue: f64 },

    #[error("non-finite value encountered in {0}")]
    NumericOverflow(&'static str),

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad binary matrix {path} at byte offset {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IcaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IcaError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics (rank deficiency, singular
    /// matrices, overflow) rather than by malformed input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            IcaError::RankDeficient { .. } | IcaError::NumericOverflow(_) | IcaError::Degenerate(_)
        )
    }
}
