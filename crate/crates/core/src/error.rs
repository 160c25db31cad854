use thiserror::Error;

use crate::binpoly::Var;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("assignment does not cover variable {0}")]
    MissingVar(Var),
    #[error("{0} is even; divide out the factors of two first")]
    EvenInput(u64),
    #[error("{0} is too small; inputs must be at least 9")]
    TooSmall(u64),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("layout {layout} cannot produce {n}: {reason}")]
    Infeasible { n: u64, layout: String, reason: String },
    #[error("{count} variables exceed the exhaustive-search cap of {cap}")]
    TooManyVars { count: usize, cap: usize },
    #[error("objective has degree {0}; quadratize before exporting")]
    DegreeTooHigh(usize),
    #[error("malformed QUBO file at line {line}: {msg}")]
    Qubo { line: usize, msg: String },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
