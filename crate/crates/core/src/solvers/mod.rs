//! Zeroth-order solvers: accelerated clipped SSTM, clipped mirror descent,
//! a momentum SGD baseline and restart wrappers.

mod restart;
mod schedule;
mod sgd;
mod smd;
mod sstm;

pub use restart::{
    resolve_restart_smd, resolve_restart_sstm, run_restarted, RestartAlgorithm, RestartInput,
    RestartSchedule, StageParams,
};
pub use schedule::{
    resolve_smd, resolve_sstm, SmdResolution, SmdTheoremInput, SstmResolution, SstmTheoremInput,
};
pub use sgd::{run_sgd_baseline, SgdParams};
pub use smd::{run_smd, smd_step, SmdSchedule, SmdState};
pub use sstm::{run_sstm, sstm_step, ClipSchedule, SstmSchedule, SstmState, StepInfo};

use rand::{Rng, SeedableRng};

use crate::noise::PairOracle;
use crate::trace::{Metric, RunRecord};
use crate::vector::{dist2, median_in_place};

/// Known minimiser, used for gap and distance reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: Option<Vec<f64>>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ZoProblem<O> {
    pub oracle: O,
    pub x0: Vec<f64>,
    pub optimum: Option<Optimum>,
}

impl<O: PairOracle> ZoProblem<O> {
    pub fn new(oracle: O, x0: Vec<f64>) -> Self {
        Self {
            oracle,
            x0,
            optimum: None,
        }
    }

    pub fn with_optimum(mut self, optimum: Optimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }
}

/// Records the objective at traced steps.
///
/// Uses the noise-free gap when both the objective and the optimum are
/// known, the noise-free value when only the objective is, and otherwise a
/// running best of medians of noisy values drawn from a private stream so
/// the solver's own stream is untouched.
pub(crate) struct Monitor<R> {
    diag: Option<R>,
    best_noisy: f64,
    draws: usize,
    every: u64,
    max_distance: Option<f64>,
}

impl<R: Rng + SeedableRng> Monitor<R> {
    pub fn new<O: PairOracle>(problem: &ZoProblem<O>, rng: &mut R, m: usize, every: usize) -> Self {
        let diag = problem
            .oracle
            .noiseless(&problem.x0)
            .is_none()
            .then(|| R::from_rng(rng));
        Self {
            diag,
            best_noisy: f64::INFINITY,
            draws: 2 * m.max(1) + 1,
            every: every.max(1) as u64,
            max_distance: None,
        }
    }

    pub fn record<O: PairOracle>(
        &mut self,
        problem: &ZoProblem<O>,
        rec: &mut RunRecord,
        step: u64,
        calls: u64,
        point: &[f64],
        force: bool,
    ) {
        if !force && !step.is_multiple_of(self.every) {
            return;
        }
        match (&mut self.diag, problem.oracle.noiseless(point)) {
            (_, Some(v)) => match &problem.optimum {
                Some(opt) => rec.push(step, calls, Metric::Gap, v - opt.value),
                None => rec.push(step, calls, Metric::Objective, v),
            },
            (Some(rng), None) => {
                let mut vals: Vec<f64> = (0..self.draws)
                    .map(|_| problem.oracle.eval_pair(point, point, rng).0)
                    .collect();
                let med = median_in_place(&mut vals);
                self.best_noisy = self.best_noisy.min(med);
                rec.push(step, calls, Metric::NoisyValue, self.best_noisy);
            }
            (None, None) => {}
        }
    }

    pub fn track<O: PairOracle>(&mut self, problem: &ZoProblem<O>, points: &[&[f64]]) {
        let Some(star) = problem.optimum.as_ref().and_then(|o| o.point.as_ref()) else {
            return;
        };
        for p in points {
            let d = dist2(p, star);
            self.max_distance = Some(self.max_distance.map_or(d, |m: f64| m.max(d)));
        }
    }

    pub fn max_distance(&self) -> Option<f64> {
        self.max_distance
    }
}
