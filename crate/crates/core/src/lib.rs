//! Doeblin graphs of Markov chains, their bridge subgraphs, coupling from the
//! past, the slice renewal chain and mass-transport diagnostics.
//!
//! The numerical core is generic over [`Probability`]: exact rationals for the
//! slice-chain algebra, `f64`/`f32` when speed matters more than exactness.

pub mod bridge;
pub mod cftp;
pub mod doeblin;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod mtp;
pub mod renewal;
pub mod scalar;
pub mod stats;

pub use doeblin::Capped;
pub use driver::{ChainSpec, Noise, NoiseMode, NoiseOracle, State, Time};
pub use error::{Error, Result};
pub use scalar::Probability;

/// Exact rational probability.
pub type Rational = num_rational::BigRational;

/// Chain with exact rational transition probabilities.
pub type ExactChain = ChainSpec<Rational>;

/// Chain with `f64` transition probabilities.
pub type FloatChain = ChainSpec<f64>;
