use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("value is not integral after scaling: {0}")]
    NonIntegral(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("size guard exceeded: {n} agents, limit {limit}")]
    GuardExceeded { n: usize, limit: usize },
    #[error("payoff vector is not efficient: {0}")]
    Inefficient(String),
    #[error("validation failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("separation oracle returned constraint already in the program (round {round})")]
    DuplicateConstraint { round: usize },
}
