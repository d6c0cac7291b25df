use thiserror::Error;

/// Errors raised by samplers, estimators, geometry and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{setup} prox-function undefined at coordinate {index} = {value}")]
    Domain {
        setup: &'static str,
        index: usize,
        value: f64,
    },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("non-finite iterate at step {step}")]
    Divergence { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Parameter {
        name,
        value,
        reason,
    }
}
