//! Synthetic `||Ax - b||_2` benchmark and a strongly convex variant.

use medclip::objective::Objective;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `f(x) = ||A (x - shift) - b||_2 + mu/2 ||x - shift||_2^2` with `A` stored
/// row-major. `shift` is zero and `mu` zero for the plain benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    a: Vec<f64>,
    b: Vec<f64>,
    rows: usize,
    d: usize,
    mu: f64,
    shift: Vec<f64>,
    sigma_max: f64,
    optimum: Vec<f64>,
    optimal_value: f64,
}

fn draw_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect()
}

impl LeastSquares {
    /// `A` and `b` with standard normal entries; the optimum is the
    /// least-norm least-squares solution.
    pub fn random(d: usize, l: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = draw_matrix(l, d, &mut rng);
        let b = draw_matrix(l, 1, &mut rng);
        Self::from_parts(a, b, l, d, 0.0)
    }

    /// `b = A x_p` for a standard normal `x_p`, so the optimal value is 0.
    pub fn planted(d: usize, l: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = draw_matrix(l, d, &mut rng);
        let xp = draw_matrix(d, 1, &mut rng);
        let b: Vec<f64> = (0..l)
            .map(|i| (0..d).map(|j| a[i * d + j] * xp[j]).sum())
            .collect();
        let mut p = Self::from_parts(a, b, l, d, 0.0);
        p.optimum = xp;
        p.optimal_value = 0.0;
        p
    }

    /// `||A (x - c)||_2 + mu/2 ||x - c||_2^2` with a random centre `c`,
    /// minimised at `c` with value 0.
    pub fn composite(d: usize, l: usize, mu: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = draw_matrix(l, d, &mut rng);
        let c = draw_matrix(d, 1, &mut rng);
        let mut p = Self::from_parts(a, vec![0.0; l], l, d, mu);
        p.shift = c.clone();
        p.optimum = c;
        p.optimal_value = 0.0;
        p
    }

    fn from_parts(a: Vec<f64>, b: Vec<f64>, rows: usize, d: usize, mu: f64) -> Self {
        let m = DMatrix::from_row_slice(rows, d, &a);
        let svd = m.clone().svd(true, true);
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rhs = DVector::from_column_slice(&b);
        let x = svd
            .solve(&rhs, 1e-12 * sigma_max.max(1.0))
            .expect("both factors were computed");
        let optimum: Vec<f64> = x.iter().copied().collect();
        let mut p = Self {
            a,
            b,
            rows,
            d,
            mu,
            shift: vec![0.0; d],
            sigma_max,
            optimum,
            optimal_value: 0.0,
        };
        p.optimal_value = p.value(&p.optimum.clone());
        p
    }

    /// Lipschitz constant of the norm term, `sigma_max(A)`.
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Objective for LeastSquares {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let mut sq = 0.0;
        let mut h2 = 0.0;
        for (xi, si) in x.iter().zip(&self.shift) {
            h2 += (xi - si) * (xi - si);
        }
        for i in 0..self.rows {
            let row = &self.a[i * d..(i + 1) * d];
            let mut r = -self.b[i];
            for j in 0..d {
                r += row[j] * (x[j] - self.shift[j]);
            }
            sq += r * r;
        }
        sq.sqrt() + 0.5 * self.mu * h2
    }
}
