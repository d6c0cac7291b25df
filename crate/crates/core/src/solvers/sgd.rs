use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Monitor, ZoProblem};
use crate::error::{param, Error, Result};
use crate::estimator::{batch_median_estimate, clip, MedianEstimatorConfig};
use crate::noise::PairOracle;
use crate::trace::RunRecord;
use crate::vector::all_finite;

/// Heavy-ball SGD on clipped median estimates:
/// `v <- momentum v + clip_2(g, lambda)`, `x <- x - a v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub iterations: usize,
    pub estimator: MedianEstimatorConfig,
    pub a: f64,
    pub momentum: f64,
    /// `None` disables clipping.
    pub lambda: Option<f64>,
    pub trace_every: usize,
}

impl SgdParams {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if !(self.a > 0.0) {
            return Err(param("a", self.a, "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(param("momentum", self.momentum, "must lie in [0, 1)"));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(param("lambda", l, "must be positive"));
            }
        }
        Ok(())
    }
}

pub fn run_sgd_baseline<O: PairOracle, R: Rng + SeedableRng>(
    problem: &ZoProblem<O>,
    params: &SgdParams,
    rng: &mut R,
) -> Result<RunRecord> {
    params.validate()?;
    let mut rec = RunRecord::default();
    let mut monitor = Monitor::new(problem, rng, params.estimator.m, params.trace_every);
    let mut x = problem.x0.clone();
    let mut v = vec![0.0; x.len()];
    let mut calls = 0;
    monitor.record(problem, &mut rec, 0, 0, &x, true);
    monitor.track(problem, &[&x]);
    for k in 0..params.iterations {
        let g = batch_median_estimate(&problem.oracle, &x, &params.estimator, rng)?;
        calls += g.oracle_calls;
        let step = match params.lambda {
            Some(l) => clip(&g.value, l, 2.0)?,
            None => g.value,
        };
        for ((vi, xi), si) in v.iter_mut().zip(x.iter_mut()).zip(&step) {
            *vi = params.momentum * *vi + si;
            *xi -= params.a * *vi;
        }
        if !all_finite(&x) {
            return Err(Error::Divergence { step: k + 1 });
        }
        monitor.track(problem, &[&x]);
        let last = k + 1 == params.iterations;
        monitor.record(problem, &mut rec, (k + 1) as u64, calls, &x, last);
    }
    rec.iterations = params.iterations as u64;
    rec.oracle_calls = calls;
    rec.max_distance = monitor.max_distance();
    rec.final_point = x;
    Ok(rec)
}
