//! Experiment harness: configuration, schedule resolution, seeded runs,
//! aggregation and grid search.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod grid;
pub mod least_squares;
pub mod resolve;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use runner::{run_experiment, ExperimentSummary};
