//! Heavy-tailed noise sources and two-point oracles.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::objective::Objective;
use crate::vector::lq_norm;

/// Tail index `kappa`, scale `delta` and density constant `gamma` of the
/// difference noise `phi(xi | x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub kappa: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl TailSpec {
    pub fn new(kappa: f64, delta: f64, gamma: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(param("kappa", kappa, "must be positive and finite"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(param("delta", delta, "must be nonnegative and finite"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(param("gamma", gamma, "must be positive and finite"));
        }
        Ok(Self {
            kappa,
            delta,
            gamma,
        })
    }

    /// Smallest `gamma` compatible with a normalised density bound.
    pub fn min_gamma(kappa: f64) -> f64 {
        (1.0 / PI).powf(1.0 / kappa)
    }
}

/// Symmetric scalar generators.
///
/// `Stable { alpha, scale }` has characteristic function
/// `exp(-|scale * u|^alpha)`, so `alpha = 1` is Cauchy and `alpha = 2` is a
/// normal law with variance `2 * scale^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetricDist {
    Cauchy { scale: f64 },
    Stable { alpha: f64, scale: f64 },
    Normal { std: f64 },
}

impl SymmetricDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SymmetricDist::Cauchy { scale } => check_scale(scale),
            SymmetricDist::Stable { alpha, scale } => {
                check_alpha(alpha)?;
                check_scale(scale)
            }
            SymmetricDist::Normal { std } => check_scale(std),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SymmetricDist::Cauchy { scale } => Cauchy::new(0.0, scale)
                .expect("validated scale")
                .sample(rng),
            SymmetricDist::Stable { alpha, scale } => scale * stable_standard(alpha, rng),
            SymmetricDist::Normal { std } => {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            }
        }
    }

    /// Tail index of the law (the stable exponent; 2 for the normal law).
    pub fn tail_index(&self) -> f64 {
        match *self {
            SymmetricDist::Cauchy { .. } => 1.0,
            SymmetricDist::Stable { alpha, .. } => alpha,
            SymmetricDist::Normal { .. } => 2.0,
        }
    }

    /// Scale in the stable parametrisation.
    pub fn stable_scale(&self) -> f64 {
        match *self {
            SymmetricDist::Cauchy { scale } => scale,
            SymmetricDist::Stable { scale, .. } => scale,
            SymmetricDist::Normal { std } => std / 2f64.sqrt(),
        }
    }

    /// Density constant: `1/pi` for Cauchy laws, 1 otherwise.
    ///
    /// For a unit-scale stable law with `alpha != 1` the density satisfies
    /// `p(u) <= 1 / (1 + |u|^(1 + alpha))`, which is the bound with
    /// `gamma = 1`.
    pub fn gamma(&self) -> f64 {
        if (self.tail_index() - 1.0).abs() < 1e-12 {
            1.0 / PI
        } else {
            1.0
        }
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(param("scale", scale, "must be positive and finite"))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(param("alpha", alpha, "must lie in (0, 2]"))
    }
}

/// Symmetric Cauchy sample with the given scale.
pub fn sample_cauchy<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    check_scale(scale)?;
    Ok(SymmetricDist::Cauchy { scale }.sample(rng))
}

/// Unit-scale symmetric alpha-stable sample (Chambers-Mallows-Stuck).
pub fn sample_levy_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(stable_standard(alpha, rng))
}

fn stable_standard<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        return 2f64.sqrt() * z;
    }
    let v = loop {
        let u: f64 = rng.random();
        let v = PI * (u - 0.5);
        // open interval
        if v.abs() < FRAC_PI_2 {
            break v;
        }
    };
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let av = alpha * v;
    av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `xi = w * xi_1 + (1 - w) * |xi_2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weight: f64,
    pub symmetric: SymmetricDist,
    pub asymmetric: SymmetricDist,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(param("weight", self.weight, "must lie in [0, 1]"));
        }
        self.symmetric.validate()?;
        self.asymmetric.validate()
    }
}

pub fn sample_mixture<R: Rng + ?Sized>(spec: &MixtureSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    Ok(mixture_unchecked(spec, rng))
}

fn mixture_unchecked<R: Rng + ?Sized>(spec: &MixtureSpec, rng: &mut R) -> f64 {
    let a = spec.symmetric.sample(rng);
    let b = spec.asymmetric.sample(rng);
    spec.weight * a + (1.0 - spec.weight) * b.abs()
}

/// Scalar noise law used by the oracles and bandit environments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseDist {
    #[default]
    None,
    Symmetric(SymmetricDist),
    Mixture(MixtureSpec),
}

impl NoiseDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseDist::None => Ok(()),
            NoiseDist::Symmetric(s) => s.validate(),
            NoiseDist::Mixture(m) => m.validate(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseDist::None => 0.0,
            NoiseDist::Symmetric(s) => s.sample(rng),
            NoiseDist::Mixture(m) => mixture_unchecked(m, rng),
        }
    }

    /// The symmetric law, if the noise is symmetric (a mixture with weight 1
    /// counts).
    pub fn symmetric(&self) -> Option<SymmetricDist> {
        match self {
            NoiseDist::Symmetric(s) => Some(*s),
            NoiseDist::Mixture(m) if m.weight == 1.0 => Some(m.symmetric),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseDist::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Independent,
    Lipschitz,
}

/// Two-point zeroth-order oracle.
pub trait PairOracle {
    fn dim(&self) -> usize;

    /// Noisy values at `x` and `y` sharing one realisation.
    fn eval_pair<R: Rng + ?Sized>(&self, x: &[f64], y: &[f64], rng: &mut R) -> (f64, f64);

    /// Pushes `n` independent realisations of `f(x, xi) - f(y, xi)` onto `out`.
    fn pair_differences<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        for _ in 0..n {
            let (fx, fy) = self.eval_pair(x, y, rng);
            out.push(fx - fy);
        }
    }

    /// Noise-free objective value, when the oracle knows it.
    fn noiseless(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

impl<T: PairOracle> PairOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval_pair<R: Rng + ?Sized>(&self, x: &[f64], y: &[f64], rng: &mut R) -> (f64, f64) {
        (**self).eval_pair(x, y, rng)
    }

    fn pair_differences<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        (**self).pair_differences(x, y, n, rng, out)
    }

    fn noiseless(&self, x: &[f64]) -> Option<f64> {
        (**self).noiseless(x)
    }
}

/// Objective corrupted by additive (independent mode) or linear
/// (Lipschitz mode) noise.
#[derive(Debug, Clone)]
pub struct NoiseOracle<F> {
    objective: F,
    mode: OracleMode,
    dist: NoiseDist,
    correlation: Option<Vec<f64>>,
    component_scales: Option<Vec<f64>>,
}

impl<F: Objective> NoiseOracle<F> {
    pub fn new(objective: F, mode: OracleMode, dist: NoiseDist) -> Result<Self> {
        dist.validate()?;
        Ok(Self {
            objective,
            mode,
            dist,
            correlation: None,
            component_scales: None,
        })
    }

    pub fn noiseless_oracle(objective: F) -> Self {
        Self {
            objective,
            mode: OracleMode::Independent,
            dist: NoiseDist::None,
            correlation: None,
            component_scales: None,
        }
    }

    /// Row-major `d x d` matrix `A` with `xi = A xi_ind` (Lipschitz mode).
    pub fn with_correlation(mut self, matrix: Vec<f64>) -> Result<Self> {
        let d = self.objective.dim();
        if matrix.len() != d * d {
            return Err(param(
                "correlation",
                matrix.len() as f64,
                "must have d*d entries",
            ));
        }
        self.correlation = Some(matrix);
        Ok(self)
    }

    /// Per-component multipliers of `xi_ind` (Lipschitz mode).
    pub fn with_component_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != self.objective.dim() {
            return Err(param(
                "component_scales",
                scales.len() as f64,
                "must have d entries",
            ));
        }
        if let Some(s) = scales.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(param("component_scales", *s, "must be nonnegative"));
        }
        self.component_scales = Some(scales);
        Ok(self)
    }

    pub fn objective(&self) -> &F {
        &self.objective
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn dist(&self) -> &NoiseDist {
        &self.dist
    }

    pub fn eval_pair_independent<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        rng: &mut R,
    ) -> (f64, f64) {
        let fx = self.objective.value(x);
        let fy = self.objective.value(y);
        let (nx, ny) = self.independent_noise(rng);
        (fx + nx, fy + ny)
    }

    pub fn eval_pair_lipschitz<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        rng: &mut R,
    ) -> (f64, f64) {
        let fx = self.objective.value(x);
        let fy = self.objective.value(y);
        let (nx, ny) = self.lipschitz_noise(x, y, rng);
        (fx + nx, fy + ny)
    }

    fn independent_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if self.dist.is_none() {
            return (0.0, 0.0);
        }
        let a = self.dist.sample(rng);
        let b = self.dist.sample(rng);
        (a, b)
    }

    /// Returns `(<xi, x>, <xi, y>)` for one draw of the noise vector.
    fn lipschitz_noise<R: Rng + ?Sized>(&self, x: &[f64], y: &[f64], rng: &mut R) -> (f64, f64) {
        if self.dist.is_none() {
            return (0.0, 0.0);
        }
        let d = x.len();
        let scale = |k: usize| self.component_scales.as_ref().map_or(1.0, |s| s[k]);
        match &self.correlation {
            None => {
                let (mut nx, mut ny) = (0.0, 0.0);
                for k in 0..d {
                    let xi = scale(k) * self.dist.sample(rng);
                    nx += xi * x[k];
                    ny += xi * y[k];
                }
                (nx, ny)
            }
            Some(a) => {
                let ind: Vec<f64> = (0..d).map(|k| scale(k) * self.dist.sample(rng)).collect();
                let (mut nx, mut ny) = (0.0, 0.0);
                for i in 0..d {
                    let row = &a[i * d..(i + 1) * d];
                    let xi: f64 = row.iter().zip(&ind).map(|(r, v)| r * v).sum();
                    nx += xi * x[i];
                    ny += xi * y[i];
                }
                (nx, ny)
            }
        }
    }

    /// Declared tail of the difference noise, `None` for asymmetric noise.
    ///
    /// Independent mode: `delta = gamma * 2^(1/kappa) * s`, the scale of the
    /// difference of two draws. Lipschitz mode: `delta = gamma * ||s||_r *
    /// ||A^T||_2` with `1/r = 1/kappa - 1/2`, which bounds the stable scale
    /// of `<xi_ind, A^T h>` per unit `||h||_2`.
    pub fn tail(&self) -> Option<TailSpec> {
        let law = match self.dist {
            NoiseDist::None => {
                return Some(TailSpec {
                    kappa: 2.0,
                    delta: 0.0,
                    gamma: 1.0,
                })
            }
            _ => self.dist.symmetric()?,
        };
        let kappa = law.tail_index();
        let gamma = law.gamma();
        let s = law.stable_scale();
        let delta = match self.mode {
            OracleMode::Independent => gamma * 2f64.powf(1.0 / kappa) * s,
            OracleMode::Lipschitz => {
                let d = self.objective.dim();
                let scales: Vec<f64> = match &self.component_scales {
                    Some(c) => c.iter().map(|v| v * s).collect(),
                    None => vec![s; d],
                };
                let r = if kappa >= 2.0 {
                    f64::INFINITY
                } else {
                    2.0 * kappa / (2.0 - kappa)
                };
                let a_norm = match &self.correlation {
                    Some(a) => spectral_norm(a, d),
                    None => 1.0,
                };
                gamma * quasi_norm(&scales, r) * a_norm
            }
        };
        Some(TailSpec {
            kappa,
            delta,
            gamma,
        })
    }
}

/// `l_r` (quasi-)norm, valid for any `r > 0`.
fn quasi_norm(v: &[f64], r: f64) -> f64 {
    if r >= 1.0 || r.is_infinite() {
        lq_norm(v, r)
    } else {
        v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Largest singular value of a row-major square matrix by power iteration
/// on `A^T A`.
fn spectral_norm(a: &[f64], d: usize) -> f64 {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut est = 0.0;
    for _ in 0..1000 {
        let av: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| a[i * d + j] * v[j]).sum())
            .collect();
        let w: Vec<f64> = (0..d)
            .map(|j| (0..d).map(|i| a[i * d + j] * av[i]).sum())
            .collect();
        let n = lq_norm(&w, 2.0);
        if n == 0.0 {
            return 0.0;
        }
        let next = n.sqrt();
        v = w.iter().map(|x| x / n).collect();
        if (next - est).abs() <= 1e-14 * next {
            return next;
        }
        est = next;
    }
    est
}

impl<F: Objective> PairOracle for NoiseOracle<F> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn eval_pair<R: Rng + ?Sized>(&self, x: &[f64], y: &[f64], rng: &mut R) -> (f64, f64) {
        match self.mode {
            OracleMode::Independent => self.eval_pair_independent(x, y, rng),
            OracleMode::Lipschitz => self.eval_pair_lipschitz(x, y, rng),
        }
    }

    fn pair_differences<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        // the noiseless part is shared by every realisation
        let base = self.objective.value(x) - self.objective.value(y);
        for _ in 0..n {
            let (nx, ny) = match self.mode {
                OracleMode::Independent => self.independent_noise(rng),
                OracleMode::Lipschitz => self.lipschitz_noise(x, y, rng),
            };
            out.push(base + (nx - ny));
        }
    }

    fn noiseless(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective.value(x))
    }
}
