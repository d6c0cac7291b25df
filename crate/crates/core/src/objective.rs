//! Deterministic objectives used by the oracles.

use crate::vector::{dot, norm2};

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// `f(x) = <c, x>`
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub c: Vec<f64>,
}

impl Linear {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn zero(d: usize) -> Self {
        Self { c: vec![0.0; d] }
    }
}

impl Objective for Linear {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }
}

/// `f(x) = ||A (x - x*)||_2 + mu/2 ||x - x*||_2^2`, minimised at `x*` with
/// value 0. `A` is row-major with `rows x d` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub a: Vec<f64>,
    pub rows: usize,
    pub center: Vec<f64>,
    pub mu: f64,
}

impl Composite {
    pub fn new(a: Vec<f64>, rows: usize, center: Vec<f64>, mu: f64) -> Self {
        assert_eq!(a.len(), rows * center.len(), "matrix shape");
        Self {
            a,
            rows,
            center,
            mu,
        }
    }
}

impl Objective for Composite {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.center.len();
        let h: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let r: Vec<f64> = (0..self.rows)
            .map(|i| dot(&self.a[i * d..(i + 1) * d], &h))
            .collect();
        norm2(&r) + 0.5 * self.mu * dot(&h, &h)
    }
}

/// Wraps a closure as an objective.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
