use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),

    #[error("invalid column: {0}")]
    InvalidColumn(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration of {count} columns exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("pair potential is not finite at sites {0} and {1}")]
    NonFinitePotential(usize, usize),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("need at least two particles, got {0}")]
    TooFewParticles(u32),

    #[error("negative weight {0} in plan")]
    NegativeWeight(f64),

    #[error("plan weights sum to {0}, expected 1")]
    UnnormalizedPlan(f64),

    #[error("restricted master problem is infeasible")]
    Infeasible,

    #[error("LP solver stopped after {iterations} iterations without an optimality certificate")]
    NumericalFailure { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    InvalidInstance(String),

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
