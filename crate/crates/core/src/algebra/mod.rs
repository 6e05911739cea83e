//! Exact arithmetic: rationals, symbols, multivariate polynomials and matrices.

pub mod matrix;
pub mod poly;
pub mod rational;
pub mod symbol;

pub use matrix::{solve_affine, AffineSolution, EigenData, EigenOutcome, RatMatrix};
pub use poly::{Monomial, MultiPoly};
pub use rational::Rational;
pub use symbol::Symbol;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("symbol `{0}` is not bound")]
    UnboundSymbol(String),
    #[error("shape error: {0}")]
    Shape(String),
}
