//! Crate-wide error type.
//!
//! One enum rather than per-module errors: grade failures propagate through
//! strategies, oracles, and the CLI, and the CLI needs a stable error→exit-code
//! mapping across all of them.

use thiserror::Error;

use crate::markov::StateId;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("cannot advance from destination state {0:?}")]
    StepFromDestination(StateId),
    #[error("trajectory exceeded the step ceiling of {ceiling} (system {system})")]
    NonTerminating { system: usize, ceiling: usize },
    #[error("value iteration did not converge within {0} iterations")]
    IterationLimit(usize),
    #[error("grade table for system {expected} applied to trajectory of system {got}")]
    SystemMismatch { expected: usize, got: usize },
    #[error("no reservation value at or above the minimum outcome: price {price} exceeds E[X - min] = {surplus}")]
    NoRoot { price: f64, surplus: f64 },
    #[error("base set is itself infeasible")]
    InfeasibleBase,
    #[error("covering marginal function made no progress: set infeasible but all marginals non-positive")]
    NoProgress,
    #[error("system {0} is not a DAG; this operation requires acyclic Markov systems")]
    NotDag(usize),
    #[error("replay profile exhausted for system {0}: strategy demanded a step beyond the recorded trajectory")]
    ProfileExhausted(usize),
    #[error("play schedule stopped system {system} mid-epoch at state {state:?}")]
    EpochViolation { system: usize, state: StateId },
    #[error("instance too large for exact evaluation: {detail}")]
    TooLargeForExact { detail: String },
    #[error("joint state space exceeds the cap of {cap} states")]
    StateSpaceTooLarge { cap: usize },
    #[error("too many trajectory profiles: {count} exceeds the cap of {cap}")]
    TooManyProfiles { count: usize, cap: usize },
    #[error("strategy returned no action for a reachable joint state")]
    UndefinedAction,
    #[error("unsupported polytope for the commitment LP: {0}")]
    UnsupportedPolytope(String),
    #[error("linear program is infeasible")]
    LpInfeasible,
    #[error("linear program is unbounded")]
    LpUnbounded,
    #[error("point outside the rank-1 polytope: {0}")]
    OutsidePolytope(String),
    #[error("LP solution puts zero measure on a state the playout would enter")]
    DivisionDegenerate,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("{e}"))
    }
}
