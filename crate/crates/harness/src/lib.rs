//! Experiment orchestration for the GM-GAN toolkit: `key=value` configs,
//! the experiment recipes, and their CSV outputs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod stats;

pub use config::{ExperimentConfig, Experiment};
pub use error::{HarnessError, Result};
