use thiserror::Error;

use crate::validation::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("generator is reducible or has no unique stationary vector: {0}")]
    Reducible(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid phase-type representation:\n{0}")]
    InvalidPhaseType(ValidationReport),

    #[error("invalid system model:\n{0}")]
    InvalidSpec(ValidationReport),

    #[error("diagonal block of macro-state {0} is singular")]
    SingularDiagonalBlock(String),

    #[error("block recursion disagrees with the direct solve by {deviation:e}")]
    CrossCheck { deviation: f64 },

    #[error("assembled generator row {row} sums to {sum:e}")]
    AssemblyRowSum { row: usize, sum: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimulation(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("invalid economics: {0}")]
    InvalidEconomics(String),

    #[error("config: {0}")]
    Config(String),
}
