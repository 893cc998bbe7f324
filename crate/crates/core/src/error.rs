use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlnnError>;

#[derive(Debug, Error)]
pub enum GlnnError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row} of the label matrix is not one-hot")]
    NotOneHot { row: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("non-finite {term} loss at epoch {epoch}")]
    NonFinite { epoch: usize, term: &'static str },

    #[error("bad binary file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GlnnError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GlnnError::InvalidArgument(msg.into())
    }
}
