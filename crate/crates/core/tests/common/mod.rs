#![allow(dead_code)]
//! Independent oracles for the integration tests. Nothing here calls into
//! the solver code paths it is used to check.

use std::f64::consts::TAU;

/// `log I_ν(x)` for integer order by the power series, summed in the log
/// domain so large arguments do not overflow.
pub fn log_bessel_i(order: u32, x: f64) -> f64 {
    assert!(x > 0.0);
    let nu = order as f64;
    let lx2 = (x / 2.0).ln();
    let mut terms = Vec::new();
    let mut log_fact_k = 0.0;
    let mut log_fact_kn: f64 = (1..=order).map(|j| (j as f64).ln()).sum();
    let kmax = (x as usize) * 2 + 60;
    for k in 0..kmax {
        if k > 0 {
            log_fact_k += (k as f64).ln();
            log_fact_kn += ((k + order as usize) as f64).ln();
        }
        terms.push((2.0 * k as f64 + nu) * lx2 - log_fact_k - log_fact_kn);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

pub fn bessel_ratio(x: f64) -> f64 {
    (log_bessel_i(1, x) - log_bessel_i(0, x)).exp()
}

/// Continuous von Mises mass of the arc `[lo, hi]` by composite Simpson.
pub fn von_mises_arc_mass(c: f64, lo: f64, hi: f64) -> f64 {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let f = |a: f64| (c * (a.cos() - 1.0)).exp();
    let mut s = f(lo) + f(hi);
    for j in 1..n {
        s += f(lo + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * h / 3.0;
    let norm = TAU * (log_bessel_i(0, c) - c).exp();
    integral / norm
}

/// Discrete von Mises mass on uniform nodes satisfying `pred`.
pub fn discrete_von_mises_mass(c: f64, n: usize, pred: impl Fn(f64) -> bool) -> f64 {
    let nodes: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let w: Vec<f64> = nodes.iter().map(|a| (c * (a.cos() - 1.0)).exp()).collect();
    let total: f64 = w.iter().sum();
    nodes.iter().zip(&w).filter(|(a, _)| pred(**a)).map(|(_, w)| w).sum::<f64>() / total
}

/// Whether `a` lies within `r` of `center` on the circle (closed).
pub fn in_arc(a: f64, center: f64, r: f64) -> bool {
    let d = (a - center).rem_euclid(TAU);
    d.min(TAU - d) <= r + 1e-12
}

pub fn uniform_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// Leading eigenpair of `M = S·D` with `S` symmetric and `D = diag(d) > 0`,
/// via the symmetric similarity `D^{1/2} S D^{1/2}`. Returns `(λ, right
/// eigenvector, left eigenvector)`.
pub fn dense_leading_pair(s: &[Vec<f64>], d: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = d.len();
    let sq: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| sq[i] * s[i][j] * sq[j]);
    let eig = nalgebra::SymmetricEigen::new(a);
    let (k, lambda) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let u = eig.eigenvectors.column(k);
    let sign = if u.sum() < 0.0 { -1.0 } else { 1.0 };
    // S D r = λ r with r = D^{-1/2} u;  l S D = λ l with l = D^{1/2} u
    let right = (0..n).map(|i| sign * u[i] / sq[i]).collect();
    let left = (0..n).map(|i| sign * u[i] * sq[i]).collect();
    (lambda, right, left)
}
