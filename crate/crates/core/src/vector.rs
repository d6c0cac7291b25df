//! Small dense-vector helpers over `&[f64]`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// ℓ_q norm for `q ∈ [1, ∞]`; `q = f64::INFINITY` gives the max-norm.
pub fn lq_norm(a: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    } else if q == 2.0 {
        norm2(a)
    } else if q == 1.0 {
        a.iter().map(|v| v.abs()).sum()
    } else {
        a.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Median of an odd-length slice; reorders the slice.
///
/// Panics on an empty slice. Even lengths return the upper middle element.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}
