//! Monomial bookkeeping, pseudoexpectations and their moment matrices.

mod basis;
pub mod io;
mod polynomial;
mod pseudo;

pub use basis::{Indeterminate, Monomial, MonomialBasis, VarId, CONSTANT};
pub use polynomial::PolynomialExpr;
pub use pseudo::{Atom, Pseudoexpectation, DEFAULT_CONDITIONING_FLOOR, DEFAULT_PSD_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum MomentError {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("monomial {0} is outside the moment matrix")]
    DegreeTooHigh(String),
    #[error("cannot condition on sample {index}: normaliser {mass:.3e} is below {floor:.1e}")]
    DegenerateConditioning { index: usize, mass: f64, floor: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("moment matrix has eigenvalue {min_eigenvalue:.3e} below -{tolerance:.1e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },
    #[error("invalid pseudoexpectation: {0}")]
    Invalid(String),
    #[error("moment file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
