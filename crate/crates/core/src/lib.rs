//! Rydberg-blockade quench simulation and sampling-based counting of
//! independent sets (monotone 2SAT solutions) on small atom registers.

pub mod corpus;
pub mod counter;
pub mod error;
pub mod evolution;
pub mod instance;
pub mod rng;
pub mod sampler;
pub mod spectrum;

pub use error::{Error, Result};
