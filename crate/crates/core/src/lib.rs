//! Cache placement on Poisson networks: mother-process sampling, the
//! independent / Matérn II / gamma-exclusion placements, spatial demand,
//! closed-form analytics, budget allocation and the Monte Carlo engine.

pub mod analytics;
pub mod budget;
pub mod demand;
pub mod error;
pub mod geometry;
pub mod mc;
pub mod pointprocess;
pub mod rng;

pub use error::{Error, Result};
