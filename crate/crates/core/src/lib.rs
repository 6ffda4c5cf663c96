//! Reliability and profit analysis of a multi-state repairable unit with
//! internal degradation, external shocks and a repairperson who takes
//! phase-type vacations. The unit is modelled as a marked Markovian arrival
//! process whose marks record failures, repairs, replacements and
//! preventive maintenance.

pub mod analysis;
pub mod config;
pub mod economics;
pub mod error;
pub mod matrix;
pub mod mmap;
pub mod model;
pub mod optimizer;
pub mod ph;
pub mod presets;
pub mod sim;
pub mod validation;

pub use error::{Error, Result};
pub use matrix::{GeneratorMatrix, Matrix};
pub use mmap::{assemble_mmap, initial_distribution, EventLabel, MmapRepresentation};
pub use model::{EconomicSpec, MacroState, SystemSpec, Variant};
pub use ph::PhaseType;
pub use validation::ValidationReport;
