//! Seeded Monte Carlo experiments over the placement policies.

pub mod config;
pub mod engine;
pub mod output;

pub use config::*;
pub use engine::*;
pub use output::*;
