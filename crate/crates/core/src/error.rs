use thiserror::Error;

use crate::poly::{ParseError, PolyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiracError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("{location}: {source}")]
    Parse {
        location: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid phase space: {0}")]
    InvalidSpace(String),
    #[error("objects live on different phase spaces")]
    SpaceMismatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("kernel condition violated at {point:?}: Ker C contains {witness:?} with |J Q^T v| = {residual:.3e}")]
    Obstruction {
        point: Vec<f64>,
        witness: Vec<f64>,
        residual: f64,
    },
    #[error("Casimir condition fails: residual entry ({row},{col}) = {poly}")]
    Residual { row: usize, col: usize, poly: String },
    #[error("matrix is not antisymmetric at ({row},{col})")]
    Antisymmetry { row: usize, col: usize },
    #[error("non-finite {what} at {point:?}")]
    NonFinite { what: String, point: Vec<f64> },
    #[error("finite-difference step {step:e} underflows at coordinate {index}")]
    StepUnderflow { step: f64, index: usize },
}
