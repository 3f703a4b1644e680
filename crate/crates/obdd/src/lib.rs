//! Experiment harness around [`obdd_core`]: random instances, noise,
//! metrics, Monte Carlo runs, JSON persistence and plot tables.

pub mod error;
pub mod experiment;
pub mod instance;
pub mod metrics;
pub mod noise;
pub mod persist;
pub mod pipeline;
pub mod rng;
pub mod tables;

pub use error::{HarnessError, Result};
