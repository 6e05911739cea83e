//! Painlevé analysis of polynomial ODE systems in exact arithmetic.
//!
//! The pipeline runs from a parsed system through the Fuchsian exponent search,
//! the Kowalevskian matrix and its resonances, the Laurent balance, and finally
//! the triangular (or canonical, for Hamiltonian input) change of variable that
//! turns the movable pole into a regular point.

pub mod algebra;
pub mod series;
pub mod model;
pub mod painleve;
pub mod regularizer;
pub mod hamiltonian;
pub mod cli;
