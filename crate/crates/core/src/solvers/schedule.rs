//! Parameter schedules derived from the convergence theorems. Constants
//! hidden in the asymptotic notation are taken to be 1.

use serde::{Deserialize, Serialize};

use super::{ClipSchedule, SmdSchedule, SstmSchedule};
use crate::error::{param, Error, Result};
use crate::estimator::{median_size, sigma_bound, MedianEstimatorConfig, SigmaBound};
use crate::geometry::{diameter, FeasibleSet, ProxSetup};
use crate::noise::{OracleMode, TailSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SstmTheoremInput {
    pub eps: f64,
    pub beta: f64,
    pub m2: f64,
    /// Estimate of `||x^0 - x*||_2`.
    pub radius: f64,
    pub iterations: usize,
    pub b: usize,
    pub d: usize,
    pub tail: TailSpec,
    pub mode: OracleMode,
    /// Median size override; `ceil(2/kappa) + 1` otherwise.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SstmResolution {
    pub schedule: SstmSchedule,
    pub sigma: SigmaBound,
    /// `ln(4K / beta)`
    pub log_factor: f64,
    /// Which term of `min{A^2, ...}` set the stepsize.
    pub a_branch: &'static str,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(name, v, "must be positive"))
    }
}

pub fn resolve_sstm(input: &SstmTheoremInput, trace_every: usize) -> Result<SstmResolution> {
    positive("eps", input.eps)?;
    positive("m2", input.m2)?;
    positive("radius", input.radius)?;
    if !(input.beta > 0.0 && input.beta <= 1.0) {
        return Err(param("beta", input.beta, "must lie in (0, 1]"));
    }
    if input.iterations == 0 {
        return Err(param("K", 0.0, "iterations must be positive"));
    }
    let m = match input.m {
        Some(m) => m,
        None => median_size(input.tail.kappa)?,
    };
    let tau = input.eps / (4.0 * input.m2);
    let estimator = MedianEstimatorConfig::new(m, input.b, tau, 2.0)?;
    let sigma = sigma_bound(&estimator, input.d, input.m2, &input.tail, input.mode)?;
    let k = input.iterations as f64;
    let log_factor = (4.0 * k / input.beta).ln();
    if log_factor < 1.0 {
        return Err(Error::Schedule(format!(
            "ln(4K/beta) = {log_factor} is below 1"
        )));
    }
    let df = input.d as f64;
    let first = log_factor * log_factor;
    let second = sigma.sigma() * k * k * log_factor.sqrt() * tau
        / ((input.b as f64 * df).sqrt() * input.m2 * input.radius);
    let (a, a_branch) = if first <= second {
        (first, "log_squared")
    } else {
        (second, "noise")
    };
    let schedule = SstmSchedule {
        iterations: input.iterations,
        estimator,
        a,
        smoothness: df.sqrt() * input.m2 / tau,
        clip: ClipSchedule::Theorem {
            radius: input.radius,
            log_factor,
        },
        trace_every,
    };
    Ok(SstmResolution {
        schedule,
        sigma,
        log_factor,
        a_branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdTheoremInput {
    pub eps: f64,
    pub m2: f64,
    pub iterations: usize,
    pub d: usize,
    pub tail: TailSpec,
    pub mode: OracleMode,
    pub m: Option<usize>,
    pub setup: ProxSetup,
    pub set: FeasibleSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdResolution {
    pub schedule: SmdSchedule,
    pub sigma: SigmaBound,
    pub diameter: f64,
}

/// `lambda = sigma a_q sqrt(K)`, `nu = D / lambda`, `tau = eps / (4 M2)`.
pub fn resolve_smd(input: &SmdTheoremInput, trace_every: usize) -> Result<SmdResolution> {
    positive("eps", input.eps)?;
    positive("m2", input.m2)?;
    if input.iterations == 0 {
        return Err(param("K", 0.0, "iterations must be positive"));
    }
    let m = match input.m {
        Some(m) => m,
        None => median_size(input.tail.kappa)?,
    };
    let tau = input.eps / (4.0 * input.m2);
    let q = input.setup.norms().1;
    let estimator = MedianEstimatorConfig::new(m, 1, tau, q)?;
    let sigma = sigma_bound(&estimator, input.d, input.m2, &input.tail, input.mode)?;
    let d = diameter(&input.setup, input.set, input.d)?;
    let lambda = sigma.sigma() * sigma.a_q * (input.iterations as f64).sqrt();
    Ok(SmdResolution {
        schedule: SmdSchedule {
            iterations: input.iterations,
            estimator,
            nu: d / lambda,
            lambda,
            setup: input.setup,
            set: input.set,
            trace_every,
        },
        sigma,
        diameter: d,
    })
}
