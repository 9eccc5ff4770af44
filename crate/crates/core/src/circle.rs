//! Distances between probability measures on the circle.

use std::f64::consts::TAU;

use crate::numerics::wrap_angle;

/// Wasserstein-1 distance (arc length, radians) between two discrete
/// measures on the circle, given as `(angle, mass)` atoms.
///
/// Uses the exact circular formula `min_α ∫ |F(t) − G(t) − α| dt`, whose
/// minimizer is a weighted median of the CDF difference.
pub fn circular_w1(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let zp: f64 = p.iter().map(|x| x.1).sum();
    let zq: f64 = q.iter().map(|x| x.1).sum();
    if zp <= 0.0 || zq <= 0.0 {
        return f64::NAN;
    }
    let mut events: Vec<(f64, f64)> = p
        .iter()
        .map(|&(a, m)| (wrap_angle(a), m / zp))
        .chain(q.iter().map(|&(a, m)| (wrap_angle(a), -m / zq)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    // (segment length, CDF difference on it); the wrap segment carries D = 0
    let mut segments = Vec::with_capacity(events.len());
    let mut cum = 0.0;
    for k in 0..events.len() {
        cum += events[k].1;
        let end = if k + 1 < events.len() { events[k + 1].0 } else { events[0].0 + TAU };
        let len = end - events[k].0;
        if len > 0.0 {
            segments.push((len, cum));
        }
    }
    if segments.is_empty() {
        return 0.0;
    }
    segments.sort_by(|a, b| a.1.total_cmp(&b.1));
    let total: f64 = segments.iter().map(|s| s.0).sum();
    let mut acc = 0.0;
    let mut alpha = segments[0].1;
    for &(len, d) in &segments {
        acc += len;
        if acc >= 0.5 * total {
            alpha = d;
            break;
        }
    }
    segments.iter().map(|&(len, d)| len * (d - alpha).abs()).sum()
}

/// `circular_w1` for two mass vectors on the same nodes.
pub fn grid_w1(nodes: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let a: Vec<(f64, f64)> = nodes.iter().copied().zip(p.iter().copied()).collect();
    let b: Vec<(f64, f64)> = nodes.iter().copied().zip(q.iter().copied()).collect();
    circular_w1(&a, &b)
}

/// Kolmogorov–Smirnov distance of a sample of angles to the uniform law.
pub fn ks_to_uniform(angles: &[f64]) -> f64 {
    let mut u: Vec<f64> = angles.iter().map(|&a| wrap_angle(a) / TAU).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter().enumerate().map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)).fold(0.0, f64::max)
}
