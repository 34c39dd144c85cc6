use thiserror::Error;

use crate::point::Point;

/// Iterates at the time a solver produced a non-finite value.
#[derive(Clone, Debug, PartialEq)]
pub struct DivergedState {
    pub x: Point,
    pub v: Point,
    pub w: Point,
    pub w_bar: Point,
}

#[derive(Debug, Error)]
pub enum VrviError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in point coordinate {index}")]
    NonFinite { index: usize },

    #[error("snapshot cache anchor does not match the current anchor point")]
    StaleSnapshot,

    #[error("numerical divergence at iteration {iter}")]
    Divergence {
        iter: usize,
        last_finite: Box<DivergedState>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VrviError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(VrviError::DimensionMismatch { expected, got });
    }
    Ok(())
}
