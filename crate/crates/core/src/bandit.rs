//! Clipped median mirror descent for stochastic multi-armed bandits with
//! symmetric heavy-tailed losses, and its full-information variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::estimator::{clip, median_size};
use crate::geometry::{
    bregman_project, conjugate_grad, prox_center, prox_grad, FeasibleSet, ProxSetup, SIMPLEX_FLOOR,
};
use crate::noise::NoiseDist;
use crate::trace::{ArmRow, Metric, RunRecord};
use crate::vector::{dot, median_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Bandit,
    Full,
}

/// Arms with expected losses `mu`; the loss of arm `i` at step `t` is
/// `mu_i + xi_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditEnvironment {
    pub mu: Vec<f64>,
    pub noise: NoiseDist,
    pub feedback: Feedback,
    /// One noise draw per step shared by all arms; otherwise each arm draws
    /// its own (only observable under full feedback).
    pub shared_noise: bool,
}

impl BanditEnvironment {
    pub fn new(mu: Vec<f64>, noise: NoiseDist, feedback: Feedback) -> Result<Self> {
        if mu.is_empty() {
            return Err(param("d", 0.0, "need at least one arm"));
        }
        if let Some(v) = mu.iter().find(|v| !v.is_finite()) {
            return Err(param("mu", *v, "must be finite"));
        }
        noise.validate()?;
        Ok(Self {
            mu,
            noise,
            feedback,
            shared_noise: true,
        })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn optimal_arm(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.mu.iter().enumerate() {
            if *v < self.mu[best] {
                best = i;
            }
        }
        best
    }

    pub fn mu_star(&self) -> f64 {
        self.mu[self.optimal_arm()]
    }

    fn loss_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.shared_noise {
            let xi = self.noise.sample(rng);
            self.mu.iter().map(|m| m + xi).collect()
        } else {
            self.mu.iter().map(|m| m + self.noise.sample(rng)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditSchedule {
    pub horizon: u64,
    pub m: usize,
    pub nu: f64,
    pub lambda: f64,
    pub trace_every: usize,
}

impl BanditSchedule {
    pub fn block_len(&self) -> u64 {
        2 * self.m as u64 + 1
    }

    /// `K = ceil((T - 1) / (2m + 1))`
    pub fn blocks(&self) -> u64 {
        self.horizon.saturating_sub(1).div_ceil(self.block_len())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(param("nu", self.nu, "must be nonnegative"));
        }
        if !(self.lambda > 0.0) {
            return Err(param("lambda", self.lambda, "must be positive"));
        }
        if self.horizon < self.block_len() {
            return Err(param(
                "horizon",
                self.horizon as f64,
                "must cover at least one block of 2m+1 steps",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditTheoremInput {
    pub d: usize,
    pub horizon: u64,
    pub kappa: f64,
    pub delta: f64,
    /// Bound on `||mu||_inf`.
    pub r: f64,
    pub m2: f64,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditResolution {
    pub schedule: BanditSchedule,
    pub c2: f64,
}

/// `c^2 = (32 ln d - 8)(8 M2^2 + 2 Delta^2 (2m+1)(4/kappa)^(2/kappa))`,
/// zero for a single arm.
pub fn bandit_c2(d: usize, m: usize, m2: f64, delta: f64, kappa: f64) -> f64 {
    if d <= 1 {
        return 0.0;
    }
    let lead = 32.0 * (d as f64).ln() - 8.0;
    let tail = 2.0 * delta * delta * (2.0 * m as f64 + 1.0) * (4.0 / kappa).powf(2.0 / kappa);
    lead * (8.0 * m2 * m2 + tail)
}

/// `nu = sqrt(2m+1) / sqrt(T (36 c^2 + 2 R^2))`, `lambda = sqrt(T)`.
pub fn resolve_bandit(input: &BanditTheoremInput, trace_every: usize) -> Result<BanditResolution> {
    let m = match input.m {
        Some(m) => m,
        None => median_size(input.kappa)?,
    };
    let c2 = bandit_c2(input.d, m, input.m2, input.delta, input.kappa);
    let t = input.horizon as f64;
    let denom = (t * (36.0 * c2 + 2.0 * input.r * input.r)).sqrt();
    if !(denom > 0.0) {
        return Err(Error::Schedule(
            "stepsize undefined: c^2 and R are both zero".into(),
        ));
    }
    let schedule = BanditSchedule {
        horizon: input.horizon,
        m,
        nu: (2.0 * m as f64 + 1.0).sqrt() / denom,
        lambda: t.sqrt(),
        trace_every,
    };
    schedule.validate()?;
    Ok(BanditResolution { schedule, c2 })
}

/// `g / x_arm` at the chosen coordinate, zero elsewhere.
pub fn importance_weighted(g: f64, arm: usize, x: &[f64]) -> Result<Vec<f64>> {
    let p = x[arm];
    if !(p >= SIMPLEX_FLOOR) {
        return Err(Error::Numerical(format!(
            "arm {arm} probability {p} below the floor {SIMPLEX_FLOOR}"
        )));
    }
    let mut v = vec![0.0; x.len()];
    v[arm] = g / p;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    pub x: Vec<f64>,
    pub k: u64,
    pub t: u64,
    pub cum_regret: f64,
    pub noisy_regret: f64,
    /// Sum of `<mu, x_s>` over played steps.
    pub expected_loss: f64,
    pub floor_hits: u64,
    buffer: Vec<Vec<f64>>,
}

impl BanditState {
    pub fn new(d: usize) -> Self {
        Self {
            x: prox_center(&ProxSetup::Tsallis12, FeasibleSet::Simplex, d).expect("simplex"),
            k: 0,
            t: 0,
            cum_regret: 0.0,
            noisy_regret: 0.0,
            expected_loss: 0.0,
            floor_hits: 0,
            buffer: Vec::new(),
        }
    }
}

/// What happened at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub arm: Option<usize>,
    pub is_optimal: bool,
    pub cum_regret: f64,
    pub opt_prob: f64,
}

fn draw_arm<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in x.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    x.len() - 1
}

/// Plays one step under the current strategy and buffers its estimate.
fn play_step<R: Rng + ?Sized>(
    state: &mut BanditState,
    env: &BanditEnvironment,
    rng: &mut R,
) -> Result<StepRecord> {
    let opt = env.optimal_arm();
    let mu_star = env.mu_star();
    let opt_prob = state.x[opt];
    state.t += 1;
    state.expected_loss += dot(&env.mu, &state.x);
    match env.feedback {
        Feedback::Bandit => {
            let arm = draw_arm(&state.x, rng);
            let loss = env.loss_vector(rng)[arm];
            if state.x[arm] <= SIMPLEX_FLOOR * (1.0 + 1e-9) {
                state.floor_hits += 1;
            }
            state.buffer.push(importance_weighted(loss, arm, &state.x)?);
            state.cum_regret += env.mu[arm] - mu_star;
            state.noisy_regret += loss - mu_star;
            Ok(StepRecord {
                t: state.t,
                arm: Some(arm),
                is_optimal: env.mu[arm] == mu_star,
                cum_regret: state.cum_regret,
                opt_prob,
            })
        }
        Feedback::Full => {
            let losses = env.loss_vector(rng);
            let played = dot(&losses, &state.x);
            state.cum_regret += dot(&env.mu, &state.x) - mu_star;
            state.noisy_regret += played - losses[opt];
            state.buffer.push(losses);
            Ok(StepRecord {
                t: state.t,
                arm: None,
                is_optimal: false,
                cum_regret: state.cum_regret,
                opt_prob,
            })
        }
    }
}

/// Component-wise median of the buffered estimates.
pub fn componentwise_median(samples: &[Vec<f64>]) -> Vec<f64> {
    let d = samples[0].len();
    let mut col = Vec::with_capacity(samples.len());
    (0..d)
        .map(|i| {
            col.clear();
            col.extend(samples.iter().map(|s| s[i]));
            median_in_place(&mut col)
        })
        .collect()
}

/// Median over the block, `clip_inf`, Tsallis mirror step and projection.
fn update(state: &mut BanditState, schedule: &BanditSchedule) -> Result<()> {
    let g = componentwise_median(&state.buffer);
    state.buffer.clear();
    let c = clip(&g, schedule.lambda, f64::INFINITY)?;
    let setup = ProxSetup::Tsallis12;
    let theta: Vec<f64> = prox_grad(&setup, &state.x)?
        .iter()
        .zip(&c)
        .map(|(p, ci)| p - schedule.nu * ci)
        .collect();
    let y = conjugate_grad(&setup, &theta).map_err(|e| match e {
        Error::Domain { index, value, .. } => Error::Schedule(format!(
            "mirror step left the conjugate domain at arm {index} (theta = {value}); \
             nu * lambda is too large"
        )),
        other => other,
    })?;
    state.x = bregman_project(&setup, FeasibleSet::Simplex, &y)?;
    state.k += 1;
    Ok(())
}

/// Plays `2m + 1` steps and updates the strategy once.
pub fn bandit_block_step<R: Rng + ?Sized>(
    state: &mut BanditState,
    schedule: &BanditSchedule,
    env: &BanditEnvironment,
    rng: &mut R,
) -> Result<Vec<StepRecord>> {
    let steps = (0..schedule.block_len())
        .map(|_| play_step(state, env, rng))
        .collect::<Result<Vec<_>>>()?;
    update(state, schedule)?;
    Ok(steps)
}

/// Plays exactly `T` steps; the strategy is updated after every complete
/// block and a trailing partial block is played without an update.
fn run<R: Rng + ?Sized>(
    env: &BanditEnvironment,
    schedule: &BanditSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    schedule.validate()?;
    let mut rec = RunRecord::default();
    let mut state = BanditState::new(env.d());
    let every = schedule.trace_every.max(1) as u64;
    let block = schedule.block_len();
    let mu_star = env.mu_star();
    for _ in 0..schedule.horizon {
        let s = play_step(&mut state, env, rng)?;
        if state.buffer.len() as u64 == block {
            update(&mut state, schedule)?;
        }
        if env.feedback == Feedback::Bandit {
            rec.arm_log.push(ArmRow {
                t: s.t,
                cum_regret: s.cum_regret,
                arm: s.arm.unwrap_or(0),
                is_optimal: s.is_optimal,
            });
        }
        if s.t % every == 0 || s.t == schedule.horizon {
            rec.push(s.t, s.t, Metric::CumRegret, s.cum_regret);
            if let Some(arm) = s.arm {
                rec.push(s.t, s.t, Metric::Arm, arm as f64);
                rec.push(s.t, s.t, Metric::IsOptimal, if s.is_optimal { 1.0 } else { 0.0 });
            }
            rec.push(s.t, s.t, Metric::OptProb, s.opt_prob);
            rec.push(s.t, s.t, Metric::NoisyRegret, state.noisy_regret);
            if env.feedback == Feedback::Full {
                let ratio = if mu_star == 0.0 {
                    f64::NAN
                } else {
                    state.expected_loss / (s.t as f64 * mu_star)
                };
                rec.push(s.t, s.t, Metric::RewardRatio, ratio);
            }
        }
    }
    rec.iterations = state.k;
    rec.oracle_calls = state.t;
    rec.final_point = state.x;
    rec.bump("floor_hits", state.floor_hits);
    Ok(rec)
}

pub fn run_bandit<R: Rng + ?Sized>(
    env: &BanditEnvironment,
    schedule: &BanditSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    if env.feedback != Feedback::Bandit {
        return Err(Error::Unsupported(
            "run_bandit needs a bandit-feedback environment".into(),
        ));
    }
    run(env, schedule, rng)
}

pub fn run_full_feedback<R: Rng + ?Sized>(
    env: &BanditEnvironment,
    schedule: &BanditSchedule,
    rng: &mut R,
) -> Result<RunRecord> {
    if env.feedback != Feedback::Full {
        return Err(Error::Unsupported(
            "run_full_feedback needs a full-feedback environment".into(),
        ));
    }
    run(env, schedule, rng)
}
