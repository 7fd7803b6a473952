//! The driving sequence and the pathwise transition generator.

pub mod builtin;
mod file;
mod noise;
mod spec;
mod structure;
mod validate;

pub use file::SpecFile;
pub use noise::{make_oracle, Noise, NoiseOracle, UnitDraw};
pub use spec::{ChainSpec, NoiseMode, Rule, StateSpace, TransitionMatrix};
pub use structure::{ChainStructure, CommClass};
pub use validate::{validate_spec, ClassReport, RowSumViolation, ValidationReport};

/// State identifier.
pub type State = u64;

/// Time index on `Z`.
pub type Time = i64;
