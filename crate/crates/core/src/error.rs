//! Error type shared by every module of the library.

use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("resolution too low: {got} nodes per axis, need at least {min}")]
    ResolutionTooLow { got: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("point is outside the domain")]
    OutsideDomain,

    #[error("grid too small for a finite-difference stencil at node {node}")]
    GridTooSmall { node: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expression parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("expression evaluation error: {0}")]
    Eval(#[from] EvalError),
}
