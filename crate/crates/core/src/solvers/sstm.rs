use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Monitor, ZoProblem};
use crate::error::{param, Error, Result};
use crate::estimator::{batch_median_estimate, clip, GradientSample, MedianEstimatorConfig};
use crate::noise::PairOracle;
use crate::trace::RunRecord;
use crate::vector::all_finite;

/// Clipping levels `lambda_{k+1}` of the accelerated method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClipSchedule {
    Constant { lambda: f64 },
    /// `lambda_{k+1} = radius / (alpha_{k+1} * log_factor)`
    Theorem { radius: f64, log_factor: f64 },
    Unclipped,
}

impl ClipSchedule {
    pub fn level(&self, alpha_next: f64) -> Option<f64> {
        match *self {
            ClipSchedule::Constant { lambda } => Some(lambda),
            ClipSchedule::Theorem { radius, log_factor } => {
                Some(radius / (alpha_next * log_factor))
            }
            ClipSchedule::Unclipped => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SstmSchedule {
    pub iterations: usize,
    pub estimator: MedianEstimatorConfig,
    /// Stepsize parameter `a`.
    pub a: f64,
    /// Smoothness constant `L`, `sqrt(d) M2 / tau` unless overridden.
    pub smoothness: f64,
    pub clip: ClipSchedule,
    pub trace_every: usize,
}

impl SstmSchedule {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(param("a", self.a, "must be positive"));
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(param("L", self.smoothness, "must be positive"));
        }
        match self.clip {
            ClipSchedule::Constant { lambda } if !(lambda > 0.0) => {
                Err(param("lambda", lambda, "must be positive"))
            }
            ClipSchedule::Theorem { radius, log_factor } if !(radius > 0.0 && log_factor > 0.0) => {
                Err(param("radius", radius, "radius and log factor must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        (k as f64 + 2.0) / (2.0 * self.a * self.smoothness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SstmState {
    pub k: usize,
    pub big_a: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl SstmState {
    pub fn new(x0: &[f64]) -> Self {
        Self {
            k: 0,
            big_a: 0.0,
            x: x0.to_vec(),
            y: x0.to_vec(),
            z: x0.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub oracle_calls: u64,
    pub alpha: f64,
    pub clip_level: Option<f64>,
    pub clipped: bool,
}

/// One step with the gradient supplied by `grad` at the new `x`.
pub fn sstm_step_with<G>(state: &mut SstmState, schedule: &SstmSchedule, grad: G) -> Result<StepInfo>
where
    G: FnOnce(&[f64]) -> Result<GradientSample>,
{
    let alpha = schedule.alpha(state.k);
    let a_prev = state.big_a;
    let a_next = a_prev + alpha;
    for ((xi, yi), zi) in state.x.iter_mut().zip(&state.y).zip(&state.z) {
        *xi = (a_prev * yi + alpha * zi) / a_next;
    }
    let g = grad(&state.x)?;
    let level = schedule.clip.level(alpha);
    let (step, clipped) = match level {
        Some(l) => {
            let c = clip(&g.value, l, 2.0)?;
            let clipped = c != g.value;
            (c, clipped)
        }
        None => (g.value, false),
    };
    for (zi, gi) in state.z.iter_mut().zip(&step) {
        *zi -= alpha * gi;
    }
    for (yi, zi) in state.y.iter_mut().zip(&state.z) {
        *yi = (a_prev * *yi + alpha * zi) / a_next;
    }
    state.big_a = a_next;
    state.k += 1;
    Ok(StepInfo {
        oracle_calls: g.oracle_calls,
        alpha,
        clip_level: level,
        clipped,
    })
}

pub fn sstm_step<O: PairOracle, R: Rng + ?Sized>(
    state: &mut SstmState,
    schedule: &SstmSchedule,
    oracle: &O,
    rng: &mut R,
) -> Result<StepInfo> {
    sstm_step_with(state, schedule, |x| {
        batch_median_estimate(oracle, x, &schedule.estimator, rng)
    })
}

/// Runs `K` steps and returns `y^K` with the trace of the output sequence.
pub fn run_sstm<O: PairOracle, R: Rng + SeedableRng>(
    problem: &ZoProblem<O>,
    schedule: &SstmSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    schedule.validate()?;
    let mut rec = RunRecord::default();
    let mut monitor = Monitor::new(problem, rng, schedule.estimator.m, schedule.trace_every);
    let mut state = SstmState::new(&problem.x0);
    let mut calls = 0u64;
    monitor.record(problem, &mut rec, 0, 0, &state.y, true);
    monitor.track(problem, &[&state.x]);
    for k in 0..schedule.iterations {
        let info = sstm_step(&mut state, schedule, &problem.oracle, rng)?;
        calls += info.oracle_calls;
        if info.clipped {
            rec.bump("clipped_steps", 1);
        }
        if !(all_finite(&state.y) && all_finite(&state.z)) {
            return Err(Error::Divergence { step: k + 1 });
        }
        monitor.track(problem, &[&state.x, &state.y, &state.z]);
        let last = k + 1 == schedule.iterations;
        monitor.record(problem, &mut rec, (k + 1) as u64, calls, &state.y, last);
    }
    rec.iterations = schedule.iterations as u64;
    rec.oracle_calls = calls;
    rec.max_distance = monitor.max_distance();
    rec.final_point = state.y;
    Ok(rec)
}
