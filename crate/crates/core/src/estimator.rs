//! Two-point gradient estimates, median over noise draws, batching and
//! clipping.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::noise::{OracleMode, PairOracle, TailSpec};
use crate::vector::{lq_norm, median_in_place, norm2};

/// Median half-size `m` (2m+1 draws), batch size `b`, smoothing radius
/// `tau` and clipping norm `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimatorConfig {
    pub m: usize,
    pub b: usize,
    pub tau: f64,
    pub q: f64,
}

impl MedianEstimatorConfig {
    pub fn new(m: usize, b: usize, tau: f64, q: f64) -> Result<Self> {
        let c = Self { m, b, tau, q };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(param("b", 0.0, "batch size must be positive"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(param("tau", self.tau, "must be positive"));
        }
        if !(self.q >= 2.0) {
            return Err(param("q", self.q, "must lie in [2, inf]"));
        }
        Ok(())
    }

    /// Pair evaluations per estimate: `(2m + 1) * b`.
    pub fn oracle_calls(&self) -> u64 {
        (2 * self.m as u64 + 1) * self.b as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub value: Vec<f64>,
    pub oracle_calls: u64,
}

/// Uniform direction on the unit sphere (normalised Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(param("d", 0.0, "dimension must be positive"));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&v);
        if n > 1e-300 {
            return Ok(v.into_iter().map(|x| x / n).collect());
        }
    }
}

fn shifted(x: &[f64], e: &[f64], tau: f64) -> (Vec<f64>, Vec<f64>) {
    let plus = x.iter().zip(e).map(|(a, b)| a + tau * b).collect();
    let minus = x.iter().zip(e).map(|(a, b)| a - tau * b).collect();
    (plus, minus)
}

/// `(d / 2 tau) (f(x + tau e, xi) - f(x - tau e, xi)) e`
pub fn two_point_estimate<O: PairOracle, R: Rng + ?Sized>(
    oracle: &O,
    x: &[f64],
    e: &[f64],
    tau: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(param("tau", tau, "must be positive"));
    }
    let (p, m) = shifted(x, e, tau);
    let (fp, fm) = oracle.eval_pair(&p, &m, rng);
    let s = x.len() as f64 / (2.0 * tau) * (fp - fm);
    Ok(e.iter().map(|v| s * v).collect())
}

/// Component-wise median of `2m + 1` two-point estimates sharing `x` and `e`.
///
/// All samples are multiples of `e`, so this is the scalar median of the
/// differences times `(d / 2 tau) e`.
pub fn median_estimate<O: PairOracle, R: Rng + ?Sized>(
    oracle: &O,
    x: &[f64],
    e: &[f64],
    config: &MedianEstimatorConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut scratch = Vec::with_capacity(2 * config.m + 1);
    let s = median_scalar(oracle, x, e, config, rng, &mut scratch);
    Ok(e.iter().map(|v| s * v).collect())
}

fn median_scalar<O: PairOracle, R: Rng + ?Sized>(
    oracle: &O,
    x: &[f64],
    e: &[f64],
    config: &MedianEstimatorConfig,
    rng: &mut R,
    scratch: &mut Vec<f64>,
) -> f64 {
    let (p, m) = shifted(x, e, config.tau);
    scratch.clear();
    oracle.pair_differences(&p, &m, 2 * config.m + 1, rng, scratch);
    x.len() as f64 / (2.0 * config.tau) * median_in_place(scratch)
}

/// Mean of `b` median estimates, each with a fresh direction and a fresh
/// block of realisations.
pub fn batch_median_estimate<O: PairOracle, R: Rng + ?Sized>(
    oracle: &O,
    x: &[f64],
    config: &MedianEstimatorConfig,
    rng: &mut R,
) -> Result<GradientSample> {
    config.validate()?;
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut scratch = Vec::with_capacity(2 * config.m + 1);
    for _ in 0..config.b {
        let e = sample_unit_sphere(d, rng)?;
        let s = median_scalar(oracle, x, &e, config, rng, &mut scratch);
        for (a, v) in acc.iter_mut().zip(&e) {
            *a += s * v;
        }
    }
    let inv = 1.0 / config.b as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(GradientSample {
        value: acc,
        oracle_calls: config.oracle_calls(),
    })
}

/// `g * min(||g||_q, lambda) / ||g||_q`, with `clip(0) = 0`.
pub fn clip(g: &[f64], lambda: f64, q: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(param("lambda", lambda, "must be positive"));
    }
    let n = lq_norm(g, q);
    if n <= lambda || n == 0.0 {
        return Ok(g.to_vec());
    }
    let s = lambda / n;
    Ok(g.iter().map(|v| v * s).collect())
}

/// `a_q = d^(1/q - 1/2) min{ sqrt(32 ln d - 8), sqrt(2q - 1) }`; 1 when `d = 1`.
pub fn a_q(d: usize, q: f64) -> f64 {
    if d <= 1 {
        return 1.0;
    }
    let df = d as f64;
    let log_term = (32.0 * df.ln() - 8.0).sqrt();
    if q.is_infinite() {
        return df.powf(-0.5) * log_term;
    }
    df.powf(1.0 / q - 0.5) * log_term.min((2.0 * q - 1.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaBound {
    pub sigma2: f64,
    pub a_q: f64,
}

impl SigmaBound {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Bound on the unbatched `l_q` second moment, `sigma^2 a_q^2`.
    pub fn lq_moment(&self) -> f64 {
        self.sigma2 * self.a_q * self.a_q
    }
}

/// Second-moment constant for the median estimator.
pub fn sigma_bound(
    config: &MedianEstimatorConfig,
    d: usize,
    m2: f64,
    tail: &TailSpec,
    mode: OracleMode,
) -> Result<SigmaBound> {
    let m = config.m as f64;
    if !(m > 2.0 / tail.kappa) {
        return Err(Error::Schedule(format!(
            "median size m = {} does not exceed 2/kappa = {}",
            config.m,
            2.0 / tail.kappa
        )));
    }
    let df = d as f64;
    let k = tail.kappa;
    let tail_factor = (4.0 / k).powf(2.0 / k);
    let noise = match mode {
        OracleMode::Independent => {
            2.0 * (df * tail.delta / config.tau).powi(2) * (2.0 * m + 1.0) * tail_factor
        }
        OracleMode::Lipschitz => (16.0 * m + 8.0) * df * df * tail.delta.powi(2) * tail_factor,
    };
    Ok(SigmaBound {
        sigma2: 8.0 * df * m2 * m2 + noise,
        a_q: a_q(d, config.q),
    })
}

/// `m = ceil(2 / kappa) + 1`, the smallest integer above `2 / kappa` plus a
/// margin that keeps the strict inequality for integer `2 / kappa`.
pub fn median_size(kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(param("kappa", kappa, "must be positive"));
    }
    Ok((2.0 / kappa).ceil() as usize + 1)
}
