//! Exact multilinear polynomial algebra over binary variables.

mod parse;
mod poly;
mod var;

pub use parse::parse_poly;
pub use poly::{Assignment, Monomial, Poly};
pub use var::{Var, FACTOR_LETTERS};
