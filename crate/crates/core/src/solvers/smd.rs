use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Monitor, ZoProblem};
use crate::error::{param, Error, Result};
use crate::estimator::{clip, median_estimate, sample_unit_sphere, MedianEstimatorConfig};
use crate::geometry::{bregman_project, conjugate_grad, prox_grad, FeasibleSet, ProxSetup};
use crate::noise::PairOracle;
use crate::trace::RunRecord;
use crate::vector::all_finite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdSchedule {
    pub iterations: usize,
    /// Median size, smoothing radius and clipping norm; `b` is unused.
    pub estimator: MedianEstimatorConfig,
    pub nu: f64,
    pub lambda: f64,
    pub setup: ProxSetup,
    pub set: FeasibleSet,
    pub trace_every: usize,
}

impl SmdSchedule {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        self.setup.validate()?;
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(param("nu", self.nu, "must be nonnegative"));
        }
        if !(self.lambda > 0.0) {
            return Err(param("lambda", self.lambda, "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmdState {
    pub k: usize,
    pub x: Vec<f64>,
    /// Sum of `x^0 .. x^{k-1}`.
    pub sum: Vec<f64>,
}

impl SmdState {
    pub fn new(x0: &[f64]) -> Self {
        Self {
            k: 0,
            x: x0.to_vec(),
            sum: vec![0.0; x0.len()],
        }
    }

    /// Average of the iterates folded in so far; `x^0` before any step.
    pub fn average(&self) -> Vec<f64> {
        if self.k == 0 {
            return self.x.clone();
        }
        let n = self.k as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

/// Mirror step with a supplied estimate `g`, then Bregman projection.
pub fn smd_update(state: &mut SmdState, schedule: &SmdSchedule, g: &[f64]) -> Result<()> {
    let c = clip(g, schedule.lambda, schedule.estimator.q)?;
    let grad = prox_grad(&schedule.setup, &state.x)?;
    let theta: Vec<f64> = grad
        .iter()
        .zip(&c)
        .map(|(p, ci)| p - schedule.nu * ci)
        .collect();
    let y = conjugate_grad(&schedule.setup, &theta).map_err(|e| match e {
        Error::Domain { index, value, .. } => Error::Schedule(format!(
            "mirror step left the conjugate domain at coordinate {index} (theta = {value}); \
             nu * lambda is too large"
        )),
        other => other,
    })?;
    let next = bregman_project(&schedule.setup, schedule.set, &y)?;
    for (s, xi) in state.sum.iter_mut().zip(&state.x) {
        *s += xi;
    }
    state.x = next;
    state.k += 1;
    Ok(())
}

/// One iteration: unbatched median estimate at `x^k`, clipped mirror step,
/// projection. Returns the oracle calls used.
pub fn smd_step<O: PairOracle, R: Rng + ?Sized>(
    state: &mut SmdState,
    schedule: &SmdSchedule,
    oracle: &O,
    rng: &mut R,
) -> Result<u64> {
    let e = sample_unit_sphere(state.x.len(), rng)?;
    let g = median_estimate(oracle, &state.x, &e, &schedule.estimator, rng)?;
    smd_update(state, schedule, &g)?;
    Ok(2 * schedule.estimator.m as u64 + 1)
}

/// Runs from `problem.x0` and returns the averaged iterate.
pub fn run_smd<O: PairOracle, R: Rng + SeedableRng>(
    problem: &ZoProblem<O>,
    schedule: &SmdSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    schedule.validate()?;
    let mut rec = RunRecord::default();
    let mut monitor = Monitor::new(problem, rng, schedule.estimator.m, schedule.trace_every);
    let mut state = SmdState::new(&problem.x0);
    let mut calls = 0;
    monitor.record(problem, &mut rec, 0, 0, &state.x, true);
    monitor.track(problem, &[&state.x]);
    for k in 0..schedule.iterations {
        calls += smd_step(&mut state, schedule, &problem.oracle, rng)?;
        if !all_finite(&state.x) {
            return Err(Error::Divergence { step: k + 1 });
        }
        monitor.track(problem, &[&state.x]);
        let last = k + 1 == schedule.iterations;
        let step = (k + 1) as u64;
        if last || step.is_multiple_of(schedule.trace_every.max(1) as u64) {
            monitor.record(problem, &mut rec, step, calls, &state.average(), true);
        }
    }
    rec.iterations = schedule.iterations as u64;
    rec.oracle_calls = calls;
    rec.max_distance = monitor.max_distance();
    rec.final_point = state.average();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::prox_center;
    use crate::noise::NoiseOracle;
    use crate::objective::Linear;
    use crate::trace::Metric;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sched(setup: ProxSetup, set: FeasibleSet, nu: f64, lambda: f64, k: usize) -> SmdSchedule {
        let q = setup.norms().1;
        SmdSchedule {
            iterations: k,
            estimator: MedianEstimatorConfig::new(1, 1, 0.01, q).unwrap(),
            nu,
            lambda,
            setup,
            set,
            trace_every: 1,
        }
    }

    #[test]
    fn zero_stepsize_keeps_point() {
        let s = sched(ProxSetup::Tsallis12, FeasibleSet::Simplex, 0.0, 1.0, 1);
        let mut st = SmdState::new(&[0.2, 0.3, 0.5]);
        smd_update(&mut st, &s, &[4.0, -1.0, 2.0]).unwrap();
        for (a, b) in st.x.iter().zip(&[0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ball_whole_space_is_clipped_sgd() {
        let s = sched(ProxSetup::Ball, FeasibleSet::WholeSpace, 0.3, 2.0, 1);
        let mut st = SmdState::new(&[1.0, 1.0]);
        smd_update(&mut st, &s, &[3.0, 4.0]).unwrap();
        // clip to norm 2: (1.2, 1.6)
        assert!((st.x[0] - (1.0 - 0.3 * 1.2)).abs() < 1e-12);
        assert!((st.x[1] - (1.0 - 0.3 * 1.6)).abs() < 1e-12);
    }

    #[test]
    fn tsallis_step_moves_mass_away_from_costly_coordinate() {
        let s = sched(ProxSetup::Tsallis12, FeasibleSet::Simplex, 0.05, 10.0, 1);
        let mut st = SmdState::new(&[0.5, 0.5]);
        smd_update(&mut st, &s, &[1.0, 0.0]).unwrap();
        assert!(st.x[0] < 0.5 && st.x[1] > 0.5);
        assert!((st.x[0] + st.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conjugate_violation_is_a_schedule_error() {
        let s = sched(ProxSetup::Tsallis12, FeasibleSet::Simplex, 10.0, 10.0, 1);
        let mut st = SmdState::new(&[0.5, 0.5]);
        assert!(matches!(
            smd_update(&mut st, &s, &[-10.0, 0.0]),
            Err(Error::Schedule(_))
        ));
    }

    #[test]
    fn single_iteration_returns_prox_center() {
        let x0 = prox_center(&ProxSetup::Tsallis12, FeasibleSet::Simplex, 3).unwrap();
        let p = ZoProblem::new(NoiseOracle::noiseless_oracle(Linear::new(vec![1.0, 2.0, 3.0])), x0.clone());
        let s = sched(ProxSetup::Tsallis12, FeasibleSet::Simplex, 0.1, 5.0, 1);
        let r = run_smd(&p, &s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.final_point, x0);
    }

    #[test]
    fn linear_objective_concentrates_on_best_vertex() {
        let c = vec![0.3, 1.0, 0.7, 0.9];
        let x0 = prox_center(&ProxSetup::Entropy { gamma: 1.0 }, FeasibleSet::Simplex, 4).unwrap();
        let p = ZoProblem::new(NoiseOracle::noiseless_oracle(Linear::new(c)), x0).with_optimum(
            crate::solvers::Optimum {
                point: None,
                value: 0.3,
            },
        );
        for setup in [ProxSetup::Entropy { gamma: 1.0 }, ProxSetup::Tsallis12] {
            let s = sched(setup, FeasibleSet::Simplex, 0.02, 10.0, 10_000);
            let r = run_smd(&p, &s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let first = r.series(Metric::Gap).next().unwrap().value;
            let last = r.last(Metric::Gap).unwrap();
            assert!(last < 0.1 * first, "{}: {first} -> {last}", setup.name());
        }
    }

    proptest! {
        #[test]
        fn iterates_stay_on_simplex(seed in 0u64..500, nu in 0.001f64..0.05) {
            let p = ZoProblem::new(
                NoiseOracle::new(
                    Linear::new(vec![0.5, -0.2, 0.1]),
                    crate::noise::OracleMode::Lipschitz,
                    crate::noise::NoiseDist::Symmetric(crate::noise::SymmetricDist::Cauchy { scale: 1.0 }),
                ).unwrap(),
                vec![1.0 / 3.0; 3],
            );
            let s = sched(ProxSetup::Tsallis12, FeasibleSet::Simplex, nu, 5.0, 1);
            let mut st = SmdState::new(&p.x0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                smd_step(&mut st, &s, &p.oracle, &mut rng).unwrap();
                prop_assert!((st.x.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                prop_assert!(st.x.iter().all(|v| *v >= 1e-12));
            }
        }
    }
}
