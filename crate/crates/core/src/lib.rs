//! Compile integer factorization into pseudo-Boolean minimization.
//!
//! The pipeline mirrors the hand procedure for small instances:
//!
//! 1. [`tablegen`] lays out the binary multiplication table for a chosen
//!    factor bit-length split and emits one carry equation per column.
//! 2. [`simplify`] reduces the column system by bound-based constraint
//!    propagation and failed-value probing until few unknowns remain.
//! 3. [`energy`] squares the surviving residuals into a nonnegative energy
//!    whose zero set is exactly the solution set, with spin and QUBO forms.
//! 4. [`solver`] enumerates or anneals the energy, and [`decode`] maps ground
//!    states back to verified factors.
//!
//! [`pipeline`] strings these together.

pub mod binpoly;
pub mod decode;
pub mod energy;
pub mod pipeline;
pub mod simplify;
pub mod solver;
pub mod tablegen;

mod error;

pub use binpoly::{parse_poly, Assignment, Monomial, Poly, Var};
pub use error::{Error, Result};
