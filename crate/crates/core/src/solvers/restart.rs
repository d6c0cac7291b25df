use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{run_smd, run_sstm, ClipSchedule, SmdSchedule, SstmSchedule, ZoProblem};
use crate::error::{param, Error, Result};
use crate::estimator::{a_q, median_size, sigma_bound, MedianEstimatorConfig};
use crate::geometry::{FeasibleSet, ProxSetup};
use crate::noise::{OracleMode, PairOracle, TailSpec};
use crate::trace::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RestartAlgorithm {
    Sstm,
    Smd { setup: ProxSetup, set: FeasibleSet },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartInput {
    /// Strong convexity modulus.
    pub mu: f64,
    pub eps: f64,
    /// Initial distance bound `R_0` (the set diameter for mirror descent).
    pub r0: f64,
    pub m2: f64,
    pub beta: f64,
    pub b: usize,
    pub d: usize,
    pub tail: TailSpec,
    pub mode: OracleMode,
    pub m: Option<usize>,
    /// Optional cap on the iterations of a single stage.
    pub max_stage_iterations: Option<usize>,
    pub trace_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub t: usize,
    pub iterations: usize,
    /// `R_{t-1}`
    pub radius_prev: f64,
    /// `R_t`
    pub radius: f64,
    pub eps_t: f64,
    pub tau: f64,
    pub sigma2: f64,
    pub smoothness: Option<f64>,
    pub a: Option<f64>,
    pub log_factor: Option<f64>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    /// Iterations were reduced to the configured cap.
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSchedule {
    pub algorithm: RestartAlgorithm,
    pub n_r: usize,
    pub m: usize,
    pub b: usize,
    pub stages: Vec<StageParams>,
    pub trace_every: usize,
}

fn check_input(input: &RestartInput) -> Result<usize> {
    for (name, v) in [
        ("mu", input.mu),
        ("eps", input.eps),
        ("r0", input.r0),
        ("m2", input.m2),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(param(name, v, "must be positive"));
        }
    }
    if !(input.beta > 0.0 && input.beta <= 1.0) {
        return Err(param("beta", input.beta, "must lie in (0, 1]"));
    }
    if input.b == 0 {
        return Err(param("b", 0.0, "batch size must be positive"));
    }
    match input.m {
        Some(m) => Ok(m),
        None => median_size(input.tail.kappa),
    }
}

/// `sigma^2`, using the small-noise bound `32 (2m+1) d M2^2` for the
/// independent oracle after checking `Delta <= (kappa/4)^(1/kappa) eps / sqrt(d)`.
fn restart_sigma2(input: &RestartInput, m: usize, q: f64) -> Result<f64> {
    let df = input.d as f64;
    match input.mode {
        OracleMode::Lipschitz => {
            let cfg = MedianEstimatorConfig::new(m, input.b, 1.0, q)?;
            Ok(sigma_bound(&cfg, input.d, input.m2, &input.tail, input.mode)?.sigma2)
        }
        OracleMode::Independent => {
            let k = input.tail.kappa;
            let limit = (k / 4.0).powf(1.0 / k) * input.eps / df.sqrt();
            if input.tail.delta > limit {
                return Err(Error::Schedule(format!(
                    "independent noise scale {} exceeds the restart bound {}",
                    input.tail.delta, limit
                )));
            }
            if !(m as f64 > 2.0 / k) {
                return Err(Error::Schedule(format!(
                    "median size m = {m} does not exceed 2/kappa = {}",
                    2.0 / k
                )));
            }
            Ok(32.0 * (2.0 * m as f64 + 1.0) * df * input.m2 * input.m2)
        }
    }
}

fn cap(k: f64, input: &RestartInput) -> (usize, bool) {
    let k = (k.ceil() as usize).max(1);
    match input.max_stage_iterations {
        Some(c) if k > c => (c, true),
        _ => (k, false),
    }
}

/// Stage ladder for restarted SSTM: `N_r = ceil(log2(mu R0^2 / (2 eps)))`,
/// `R_{t-1} = 2^{-(t-1)/2} R0`, `eps_t = mu R_{t-1}^2 / 4`.
pub fn resolve_restart_sstm(input: &RestartInput) -> Result<RestartSchedule> {
    let m = check_input(input)?;
    let sigma2 = restart_sigma2(input, m, 2.0)?;
    let sigma = sigma2.sqrt();
    let n_r = (input.mu * input.r0 * input.r0 / (2.0 * input.eps))
        .log2()
        .ceil()
        .max(0.0) as usize;
    let df = input.d as f64;
    let bf = input.b as f64;
    let mut stages = Vec::with_capacity(n_r);
    for t in 1..=n_r {
        let r_prev = 2f64.powf(-((t - 1) as f64) / 2.0) * input.r0;
        let r_t = 2f64.powf(-(t as f64) / 2.0) * input.r0;
        let eps_t = input.mu * r_prev * r_prev / 4.0;
        let tau = eps_t / (4.0 * input.m2);
        let l_t = input.m2 * df.sqrt() / tau;
        let raw_k = (l_t * r_prev * r_prev / eps_t)
            .sqrt()
            .max((sigma * r_prev / eps_t).powi(2) / bf);
        let (k, capped) = cap(raw_k, input);
        let kf = k as f64;
        let a = (sigma * kf.powf(1.5) / (bf.sqrt() * l_t * r_t)).max(1.0);
        let log_factor = (4.0 * n_r as f64 * kf / input.beta).ln();
        if log_factor < 1.0 {
            return Err(Error::Schedule(format!(
                "stage {t}: ln(4 N_r K_t / beta) = {log_factor} is below 1"
            )));
        }
        stages.push(StageParams {
            t,
            iterations: k,
            radius_prev: r_prev,
            radius: r_t,
            eps_t,
            tau,
            sigma2,
            smoothness: Some(l_t),
            a: Some(a),
            log_factor: Some(log_factor),
            lambda: None,
            nu: None,
            capped,
        });
    }
    Ok(RestartSchedule {
        algorithm: RestartAlgorithm::Sstm,
        n_r,
        m,
        b: input.b,
        stages,
        trace_every: input.trace_every,
    })
}

/// Stage ladder for restarted mirror descent: `R_t = R0 / 2^t`,
/// `N = ceil(log2(mu R0^2 / (2 eps)) / 2)`, `K_t = (a_q sigma / (mu R_t))^2`,
/// `tau_t = a_q sigma R_t / (M2 sqrt(K_t))`, `lambda_t = sqrt(K_t) a_q sigma`,
/// `nu_t = R_t / lambda_t`.
pub fn resolve_restart_smd(
    input: &RestartInput,
    setup: ProxSetup,
    set: FeasibleSet,
) -> Result<RestartSchedule> {
    let m = check_input(input)?;
    setup.validate()?;
    let q = setup.norms().1;
    let sigma2 = restart_sigma2(input, m, q)?;
    let aq_sigma = a_q(input.d, q) * sigma2.sqrt();
    let n_r = (0.5 * (input.mu * input.r0 * input.r0 / (2.0 * input.eps)).log2())
        .ceil()
        .max(0.0) as usize;
    let mut stages = Vec::with_capacity(n_r);
    for t in 1..=n_r {
        let r_prev = input.r0 / 2f64.powi(t as i32 - 1);
        let r_t = input.r0 / 2f64.powi(t as i32);
        let (k, capped) = cap((aq_sigma / (input.mu * r_t)).powi(2), input);
        let sk = (k as f64).sqrt();
        let lambda = sk * aq_sigma;
        stages.push(StageParams {
            t,
            iterations: k,
            radius_prev: r_prev,
            radius: r_t,
            eps_t: input.mu * r_t * r_t / 2.0,
            tau: aq_sigma * r_t / (input.m2 * sk),
            sigma2,
            smoothness: None,
            a: None,
            log_factor: None,
            lambda: Some(lambda),
            nu: Some(r_t / lambda),
            capped,
        });
    }
    Ok(RestartSchedule {
        algorithm: RestartAlgorithm::Smd { setup, set },
        n_r,
        m,
        b: 1,
        stages,
        trace_every: input.trace_every,
    })
}

/// Runs the stages in order, each starting from the previous output.
pub fn run_restarted<O: PairOracle, R: Rng + SeedableRng>(
    problem: &ZoProblem<O>,
    schedule: &RestartSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    let mut rec = RunRecord::default();
    let mut point = problem.x0.clone();
    rec.stage_points.push(point.clone());
    let (mut steps, mut calls) = (0u64, 0u64);
    for (i, stage) in schedule.stages.iter().enumerate() {
        let sub = ZoProblem {
            oracle: &problem.oracle,
            x0: point.clone(),
            optimum: problem.optimum.clone(),
        };
        let out = match schedule.algorithm {
            RestartAlgorithm::Sstm => {
                let s = SstmSchedule {
                    iterations: stage.iterations,
                    estimator: MedianEstimatorConfig::new(schedule.m, schedule.b, stage.tau, 2.0)?,
                    a: stage.a.expect("sstm stage"),
                    smoothness: stage.smoothness.expect("sstm stage"),
                    clip: ClipSchedule::Theorem {
                        radius: stage.radius_prev,
                        log_factor: stage.log_factor.expect("sstm stage"),
                    },
                    trace_every: schedule.trace_every,
                };
                run_sstm(&sub, &s, rng)
            }
            RestartAlgorithm::Smd { setup, set } => {
                let s = SmdSchedule {
                    iterations: stage.iterations,
                    estimator: MedianEstimatorConfig::new(
                        schedule.m,
                        1,
                        stage.tau,
                        setup.norms().1,
                    )?,
                    nu: stage.nu.expect("smd stage"),
                    lambda: stage.lambda.expect("smd stage"),
                    setup,
                    set,
                    trace_every: schedule.trace_every,
                };
                run_smd(&sub, &s, rng)
            }
        }
        .map_err(|e| match e {
            Error::Divergence { step } => Error::Divergence {
                step: steps as usize + step,
            },
            other => other,
        })?;
        for row in &out.rows {
            if i > 0 && row.step == 0 {
                continue;
            }
            rec.push(steps + row.step, calls + row.oracle_calls, row.metric, row.value);
        }
        steps += out.iterations;
        calls += out.oracle_calls;
        for (k, v) in &out.counters {
            rec.bump(k, *v);
        }
        rec.max_distance = match (rec.max_distance, out.max_distance) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        point = out.final_point;
        rec.stage_points.push(point.clone());
    }
    rec.iterations = steps;
    rec.oracle_calls = calls;
    rec.final_point = point;
    Ok(rec)
}
