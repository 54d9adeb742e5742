use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", join_violations(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid fractional assignment: {0}")]
    InvalidFractional(String),

    #[error("profile mass {mass} is below 1")]
    InsufficientMass { mass: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("enumeration of {count} candidates exceeds the limit of {limit}")]
    TooLarge { count: f64, limit: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
