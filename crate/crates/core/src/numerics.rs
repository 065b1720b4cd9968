//! Deterministic reductions, Gauss rules and small fitting helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Pairwise summation with a fixed split order, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if v.len() <= LEAF {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Order-preserving parallel map.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving parallel map over `0..n`.
pub fn par_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Weighted sum `Σ wᵢ fᵢ` with per-node terms computed in parallel and
/// reduced pairwise in node order.
pub fn integrate<F>(weights: &[f64], f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let terms = par_range(weights.len(), |i| weights[i] * f(i));
    pairwise_sum(&terms)
}

/// Several integrals at once; each component reduced pairwise in node order.
pub fn integrate_vec<F>(weights: &[f64], dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    let terms: Vec<Vec<f64>> = par_range(weights.len(), |i| {
        let mut v = f(i);
        for x in v.iter_mut() {
            *x *= weights[i];
        }
        v
    });
    (0..dim)
        .map(|c| {
            let col: Vec<f64> = terms.iter().map(|t| t[c]).collect();
            pairwise_sum(&col)
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (x, w) in pairs.iter_mut() {
        let (px, dpx) = legendre(n, *x);
        let x1 = *x - px / dpx;
        *x = x1;
        let (_, d) = legendre(n, x1);
        *w = 2.0 / ((1.0 - x1 * x1) * d * d);
    }
    pairs.into_iter().unzip()
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| (c + h * xi, h * wi)).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
