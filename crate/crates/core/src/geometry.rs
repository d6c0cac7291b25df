//! Prox-functions, their conjugate gradients, Bregman divergences and
//! Bregman projections.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::vector::{dot, norm2};

/// Lower bound kept on simplex coordinates under the Tsallis setup.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

const PROJECTION_TOL: f64 = 1e-10;
const MAX_ROOT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSetup {
    /// `1/2 ||x||_2^2`
    Ball,
    /// `(1 + gamma) sum (x_i + gamma/d) log(x_i + gamma/d)`
    Entropy {
        #[serde(default = "unit_gamma")]
        gamma: f64,
    },
    /// `2 (1 - sum sqrt(x_i))`
    Tsallis12,
}

fn unit_gamma() -> f64 {
    1.0
}

impl ProxSetup {
    pub fn name(&self) -> &'static str {
        match self {
            ProxSetup::Ball => "ball",
            ProxSetup::Entropy { .. } => "entropy",
            ProxSetup::Tsallis12 => "tsallis12",
        }
    }

    /// Primal and dual norm indices `(p, q)`.
    pub fn norms(&self) -> (f64, f64) {
        match self {
            ProxSetup::Ball => (2.0, 2.0),
            ProxSetup::Entropy { .. } => (1.0, f64::INFINITY),
            ProxSetup::Tsallis12 => (1.0, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProxSetup::Entropy { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(param("entropy_gamma", gamma, "must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleSet {
    WholeSpace,
    Simplex,
    UnitBall,
}

fn shift(setup: &ProxSetup, d: usize) -> f64 {
    match *setup {
        ProxSetup::Entropy { gamma } => gamma / d as f64,
        _ => 0.0,
    }
}

fn check_domain(setup: &ProxSetup, x: &[f64]) -> Result<()> {
    let (strict_above, name) = match setup {
        ProxSetup::Ball => return Ok(()),
        ProxSetup::Entropy { .. } => (-shift(setup, x.len()), "entropy"),
        ProxSetup::Tsallis12 => (0.0, "tsallis12"),
    };
    for (i, v) in x.iter().enumerate() {
        if !(*v > strict_above) || !v.is_finite() {
            return Err(Error::Domain {
                setup: name,
                index: i,
                value: *v,
            });
        }
    }
    Ok(())
}

pub fn prox_value(setup: &ProxSetup, x: &[f64]) -> Result<f64> {
    setup.validate()?;
    match *setup {
        ProxSetup::Ball => Ok(0.5 * dot(x, x)),
        ProxSetup::Entropy { gamma } => {
            check_domain(setup, x)?;
            let g = shift(setup, x.len());
            Ok((1.0 + gamma) * x.iter().map(|v| (v + g) * (v + g).ln()).sum::<f64>())
        }
        ProxSetup::Tsallis12 => {
            // the value extends continuously to the boundary
            if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::Domain {
                    setup: "tsallis12",
                    index: i,
                    value: *v,
                });
            }
            Ok(2.0 * (1.0 - x.iter().map(|v| v.sqrt()).sum::<f64>()))
        }
    }
}

pub fn prox_grad(setup: &ProxSetup, x: &[f64]) -> Result<Vec<f64>> {
    setup.validate()?;
    check_domain(setup, x)?;
    Ok(match *setup {
        ProxSetup::Ball => x.to_vec(),
        ProxSetup::Entropy { gamma } => {
            let g = shift(setup, x.len());
            x.iter()
                .map(|v| (1.0 + gamma) * (1.0 + (v + g).ln()))
                .collect()
        }
        ProxSetup::Tsallis12 => x.iter().map(|v| -1.0 / v.sqrt()).collect(),
    })
}

/// Gradient of the convex conjugate, the maximiser of `<theta, x> - Psi(x)`.
pub fn conjugate_grad(setup: &ProxSetup, theta: &[f64]) -> Result<Vec<f64>> {
    setup.validate()?;
    match *setup {
        ProxSetup::Ball => Ok(theta.to_vec()),
        ProxSetup::Entropy { gamma } => {
            let g = shift(setup, theta.len());
            Ok(theta
                .iter()
                .map(|t| (t / (1.0 + gamma) - 1.0).exp() - g)
                .collect())
        }
        ProxSetup::Tsallis12 => {
            if let Some((i, t)) = theta.iter().enumerate().find(|(_, t)| !(**t < 0.0)) {
                return Err(Error::Domain {
                    setup: "tsallis12",
                    index: i,
                    value: *t,
                });
            }
            Ok(theta.iter().map(|t| 1.0 / (t * t)).collect())
        }
    }
}

/// `V(y, x) = Psi(y) - Psi(x) - <grad Psi(x), y - x>` in closed form.
pub fn bregman(setup: &ProxSetup, y: &[f64], x: &[f64]) -> Result<f64> {
    setup.validate()?;
    check_domain(setup, x)?;
    match *setup {
        ProxSetup::Ball => {
            let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            Ok(0.5 * dot(&d, &d))
        }
        ProxSetup::Entropy { gamma } => {
            check_domain(setup, y)?;
            let g = shift(setup, x.len());
            let s: f64 = y
                .iter()
                .zip(x)
                .map(|(yi, xi)| (yi + g) * ((yi + g) / (xi + g)).ln() - (yi - xi))
                .sum();
            Ok((1.0 + gamma) * s)
        }
        ProxSetup::Tsallis12 => {
            prox_value(setup, y)?;
            Ok(y.iter()
                .zip(x)
                .map(|(yi, xi)| {
                    let r = xi.sqrt();
                    (yi.sqrt() - r).powi(2) / r
                })
                .sum())
        }
    }
}

/// `argmin_{x in set} V(x, y)`.
pub fn bregman_project(setup: &ProxSetup, set: FeasibleSet, y: &[f64]) -> Result<Vec<f64>> {
    setup.validate()?;
    if y.is_empty() {
        return Err(param("d", 0.0, "dimension must be positive"));
    }
    match (setup, set) {
        (ProxSetup::Ball, FeasibleSet::WholeSpace) => Ok(y.to_vec()),
        (ProxSetup::Ball, FeasibleSet::UnitBall) => {
            let n = norm2(y);
            Ok(if n > 1.0 {
                y.iter().map(|v| v / n).collect()
            } else {
                y.to_vec()
            })
        }
        (ProxSetup::Ball, FeasibleSet::Simplex) => Ok(euclidean_simplex(y)),
        (ProxSetup::Entropy { .. }, FeasibleSet::Simplex) => {
            check_domain(setup, y)?;
            Ok(entropy_simplex(y, shift(setup, y.len())))
        }
        (ProxSetup::Tsallis12, FeasibleSet::Simplex) => {
            check_domain(setup, y)?;
            tsallis_simplex(y)
        }
        (s, q) => Err(Error::Unsupported(format!(
            "projection for {} setup onto {:?}",
            s.name(),
            q
        ))),
    }
}

fn euclidean_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, v) in u.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// `x_i = max(0, (y_i + g) t - g)` with `t` chosen so the sum is one.
fn entropy_simplex(y: &[f64], g: f64) -> Vec<f64> {
    let mut w: Vec<f64> = y.iter().map(|v| v + g).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut t = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk;
        let cand = (1.0 + (k + 1) as f64 * g) / acc;
        if wk * cand - g > 0.0 {
            t = cand;
        } else {
            break;
        }
    }
    let x: Vec<f64> = y.iter().map(|v| ((v + g) * t - g).max(0.0)).collect();
    normalise(x)
}

fn normalise(mut x: Vec<f64>) -> Vec<f64> {
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    x
}

/// Tsallis projection: `x_i = (a_i - c)^-2`, `a_i = y_i^-1/2`, with
/// `sum x_i = 1`. The root lies in `[min a - sqrt(d), min a - 1]`.
fn tsallis_simplex(y: &[f64]) -> Result<Vec<f64>> {
    let a: Vec<f64> = y.iter().map(|v| 1.0 / v.sqrt()).collect();
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    let c = tsallis_root(&a, amin).ok_or_else(|| {
        Error::Numerical(format!(
            "tsallis projection did not converge in {MAX_ROOT_ITERS} iterations for y = {y:?}"
        ))
    })?;
    let x: Vec<f64> = a
        .iter()
        .map(|ai| (1.0 / (ai - c).powi(2)).max(SIMPLEX_FLOOR))
        .collect();
    Ok(normalise(x))
}

/// Multiplier `c` of the Tsallis projection of the point with inverse
/// square roots `a`.
pub fn tsallis_multiplier(y: &[f64]) -> Result<f64> {
    check_domain(&ProxSetup::Tsallis12, y)?;
    let a: Vec<f64> = y.iter().map(|v| 1.0 / v.sqrt()).collect();
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    tsallis_root(&a, amin).ok_or_else(|| Error::Numerical("tsallis root".into()))
}

fn tsallis_root(a: &[f64], amin: f64) -> Option<f64> {
    let d = a.len() as f64;
    let eval = |c: f64| {
        let (mut s, mut ds) = (0.0, 0.0);
        for ai in a {
            let r = 1.0 / (ai - c);
            s += r * r;
            ds += 2.0 * r * r * r;
        }
        (s - 1.0, ds)
    };
    let mut lo = amin - d.sqrt();
    let mut hi = amin - 1.0;
    if d == 1.0 {
        return Some(hi);
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..MAX_ROOT_ITERS {
        let (f, df) = eval(c);
        if f.abs() <= PROJECTION_TOL {
            return Some(c);
        }
        if f < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        let newton = c - f / df;
        c = if newton > lo && newton < hi && df > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let (f, _) = eval(c);
            return (f.abs() <= PROJECTION_TOL).then_some(c);
        }
    }
    None
}

/// Minimiser of the prox-function over the set.
pub fn prox_center(setup: &ProxSetup, set: FeasibleSet, d: usize) -> Result<Vec<f64>> {
    match (setup, set) {
        (_, FeasibleSet::Simplex) => Ok(vec![1.0 / d as f64; d]),
        (ProxSetup::Ball, _) => Ok(vec![0.0; d]),
        (s, q) => Err(Error::Unsupported(format!(
            "{} setup on {:?}",
            s.name(),
            q
        ))),
    }
}

/// `D` with `D^2 = 2 sup V`.
///
/// For the Euclidean setup the supremum runs over all pairs of the set. The
/// entropy and Tsallis divergences are unbounded near the simplex boundary in
/// their second argument, so there the supremum is taken from the prox
/// center, `D^2 = 2 (max Psi - min Psi)`.
pub fn diameter(setup: &ProxSetup, set: FeasibleSet, d: usize) -> Result<f64> {
    setup.validate()?;
    if d == 0 {
        return Err(param("d", 0.0, "dimension must be positive"));
    }
    let df = d as f64;
    let d2 = match (*setup, set) {
        (_, FeasibleSet::WholeSpace) => {
            return Err(Error::Unsupported("diameter of the whole space".into()))
        }
        (ProxSetup::Ball, FeasibleSet::UnitBall) => 4.0,
        (ProxSetup::Ball, FeasibleSet::Simplex) => {
            if d == 1 {
                0.0
            } else {
                2.0
            }
        }
        (ProxSetup::Tsallis12, FeasibleSet::Simplex) => 4.0 * (df.sqrt() - 1.0),
        (ProxSetup::Entropy { .. }, FeasibleSet::Simplex) => {
            let mut vertex = vec![0.0; d];
            vertex[0] = 1.0;
            let center = vec![1.0 / df; d];
            2.0 * (prox_value(setup, &vertex)? - prox_value(setup, &center)?)
        }
        (s, q) => {
            return Err(Error::Unsupported(format!(
                "{} setup on {:?}",
                s.name(),
                q
            )))
        }
    };
    Ok(d2.max(0.0).sqrt())
}
