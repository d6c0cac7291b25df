//! Zeroth-order optimization and bandits under heavy-tailed symmetric noise,
//! built on median-of-differences gradient estimates with clipping.

pub mod bandit;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod noise;
pub mod objective;
pub mod solvers;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use noise::{NoiseDist, NoiseOracle, OracleMode, PairOracle, SymmetricDist, TailSpec};
pub use objective::Objective;
pub use trace::{ArmRow, Metric, RunRecord, TraceRow};
