//! Search and selection algorithms for Markov search processes, bandits and
//! cabinets under matroid constraints.
//!
//! The crate covers modelling ([`model`]), Weitzman indices ([`indices`]),
//! single-agent utility problems ([`saup`]), piecewise-linear concave value
//! curves ([`plconcave`]), ex-ante relaxations ([`exante`]), matroid
//! oracles and rounding ([`matroid`]), online threshold algorithms
//! ([`prophet`]) and brute-force reference optima ([`oracles`]).

pub mod cli;
pub mod error;
pub mod exante;
pub mod generate;
pub mod indices;
pub mod matroid;
pub mod model;
pub mod oracles;
pub mod plconcave;
pub mod prophet;
pub mod saup;

pub use error::{Error, Result};
pub use matroid::{Matroid, Subset};
pub use model::{
    Action, CabinetsInstance, CmsInstance, Decision, DiscreteDistribution, Msp,
    NoiPandoraInstance, PandoraCabinetsInstance, State, StationaryPolicy, Transcript,
};
pub use plconcave::PLConcave;

/// Absolute tolerance used for probability sums and equality checks.
pub const TOLERANCE: f64 = 1e-9;

/// Generator behind every seeded operation.
pub type SimRng = rand_chacha::ChaCha8Rng;
