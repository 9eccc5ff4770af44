//! Large deviations at zero temperature.
//!
//! The deviation function is `R₊^∞ = Σ_j R₊∘σ^j` with
//! `R₊ = β(f) + V∘σ − V − f ≥ 0`. Partial sums are monotone, so every value
//! reported here is a certified lower bound at grid resolution, flagged
//! exact only when the remaining tail provably contributes nothing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxplus::{solve_maxplus, MaxPlusOptions, Subaction};
use crate::model::{ArcSet, BasePoint, FiberGrid, Potential, ShiftMetric};
use crate::numerics::linear_fit;
use crate::transfer::{build_kernel, leading_eigensystem, EigenOptions, EigenSystem, LogKernel};

pub const DEFAULT_CAP: f64 = 50.0;

/// Terms evaluated past `N` when deciding divergence or exactness.
const MAX_EXTRA_TERMS: usize = 1_000_000;

/// Coordinates summed exactly in shift-metric distances.
const METRIC_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateValue {
    Finite {
        value: f64,
        exact: bool,
    },
    /// Partial sums exceeded the cap; the cap is a certified lower bound.
    DivergentAbove {
        bound: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEvaluation {
    pub point: BasePoint,
    /// `R₊ⁿ(point)` for `n = 1..=N`.
    pub partial_sums: Vec<f64>,
    pub value: RateValue,
    pub cap: f64,
    /// Most negative raw term before clamping; interpolated `V` can dip
    /// slightly below the grid bound `R₊ ≥ 0`.
    pub interpolation_defect: f64,
}

/// `R₊(z)` at an arbitrary point, with `V` interpolated between nodes.
pub fn r_plus_at(sub: &Subaction, z: &BasePoint) -> f64 {
    let w = sub.states().window();
    let k = sub.potential().arity();
    let coords = z.coords((w + 1).max(k));
    sub.beta_f() + sub.v_at(&coords[1..=w]) - sub.v_at(&coords[..w]) - sub.potential().eval(&coords[..k])
}

pub fn rate_partial(point: &BasePoint, sub: &Subaction, n_terms: usize) -> RateEvaluation {
    rate_partial_capped(point, sub, n_terms, DEFAULT_CAP)
}

pub fn rate_partial_capped(point: &BasePoint, sub: &Subaction, n_terms: usize, cap: f64) -> RateEvaluation {
    let head = point.head().len();
    let period = point.tail().len();
    let mut defect: f64 = 0.0;
    let mut term = |j: usize| {
        let r = r_plus_at(sub, &point.shift_by(j));
        defect = defect.min(r);
        r.max(0.0)
    };
    let mut partial_sums = Vec::with_capacity(n_terms);
    let mut s = 0.0;
    for j in 0..n_terms {
        s += term(j);
        partial_sums.push(s);
    }
    // one full period of the tail decides the fate of the series
    let periodic: Vec<f64> = (head..head + period).map(&mut term).collect();
    let tail_sum: f64 = periodic.iter().sum();
    let zero_tail = periodic.iter().all(|&r| r <= MaxPlusOptions::default().tie_tol);

    let value = if s > cap {
        RateValue::DivergentAbove { bound: cap }
    } else if zero_tail {
        let exact: f64 = (0..head).map(&mut term).sum();
        RateValue::Finite { value: exact, exact: true }
    } else if tail_sum > 0.0 {
        let mut j = n_terms;
        while s <= cap && j < n_terms + MAX_EXTRA_TERMS {
            s += term(j);
            j += 1;
        }
        if s > cap {
            RateValue::DivergentAbove { bound: cap }
        } else {
            RateValue::Finite { value: s, exact: false }
        }
    } else {
        RateValue::Finite { value: s, exact: false }
    };
    RateEvaluation { point: point.clone(), partial_sums, value, cap, interpolation_defect: defect.min(0.0) }
}

#[derive(Debug, Clone, Serialize)]
pub struct SetRate {
    /// `inf` of `R₊^∞` over grid points of the set, each completed optimally.
    pub value: f64,
    /// `inf` over words of length `depth` of the partial sum `R₊^depth`.
    pub lower_bound: f64,
    pub exact: bool,
    pub depth: usize,
    /// Optimal word `x₀ … x_{depth−1}` as angles.
    pub witness: Vec<f64>,
    /// Letters after the word until a zero-cost cycle is reached.
    pub completion: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimal cost from every state to a zero-cost cycle, walking
/// `S_j → S_{j+1}` at cost `R₊(S_{j+1}, first letter of S_j)`; returns the
/// cost and the next state on an optimal path.
fn completion_costs(sub: &Subaction) -> (Vec<f64>, Vec<Option<usize>>) {
    let states = sub.states();
    let n = sub.grid().len();
    let crit = sub.uniqueness_probe(MaxPlusOptions::default().tie_tol).critical_states;
    let mut dist = vec![f64::INFINITY; states.len()];
    let mut next = vec![None; states.len()];
    let mut heap = BinaryHeap::new();
    for &s in &crit {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for a in 0..n {
            let s = states.target(u, a);
            let nd = d + sub.r_plus(u, a).max(0.0);
            if nd < dist[s] {
                dist[s] = nd;
                next[s] = Some(u);
                heap.push(Entry(nd, s));
            }
        }
    }
    (dist, next)
}

/// Infimum of `R₊^∞` over the grid points of `set`.
pub fn set_rate_inf(set: &ArcSet, sub: &Subaction, depth: usize) -> Result<SetRate> {
    if depth < set.depth() {
        return Err(Error::invalid(format!("depth {depth} is smaller than the set depth {}", set.depth())));
    }
    let states = sub.states();
    let grid = sub.grid();
    let masks = set.node_masks(grid.nodes());
    let allowed = |j: usize, s: usize| masks.get(j).is_none_or(|m| m[states.first_node(s)]);
    let (completion, next) = completion_costs(sub);

    // E_j(s): best cost from position j given S_j = s; both with and without
    // the optimal completion beyond `depth`
    let mut full = completion.clone();
    let mut partial = vec![0.0; states.len()];
    let mut choice: Vec<Vec<usize>> = Vec::with_capacity(depth);
    for j in (0..depth).rev() {
        let mut f_new = vec![f64::INFINITY; states.len()];
        let mut p_new = vec![f64::INFINITY; states.len()];
        let mut arg = vec![usize::MAX; states.len()];
        f_new.par_iter_mut().zip(p_new.par_iter_mut()).zip(arg.par_iter_mut()).enumerate().for_each(
            |(s, ((fv, pv), av))| {
                if !allowed(j, s) {
                    return;
                }
                let a = states.first_node(s);
                for i in states.predecessors(s) {
                    let r = sub.r_plus(i, a).max(0.0);
                    if r + full[i] < *fv {
                        *fv = r + full[i];
                        *av = i;
                    }
                    *pv = pv.min(r + partial[i]);
                }
            },
        );
        full = f_new;
        partial = p_new;
        choice.push(arg);
    }
    choice.reverse();

    let lower_bound = if depth == 0 { 0.0 } else { partial.iter().cloned().fold(f64::INFINITY, f64::min) };
    let (start, value) =
        full.iter().enumerate().fold((0, f64::INFINITY), |acc, (s, &v)| if v < acc.1 { (s, v) } else { acc });
    let mut witness = Vec::with_capacity(depth);
    let mut completion_letters = Vec::new();
    if value.is_finite() {
        let mut s = start;
        for arg in choice.iter().take(depth) {
            witness.push(grid.node(states.first_node(s)));
            s = arg[s];
        }
        while let Some(t) = next[s] {
            completion_letters.push(grid.node(states.first_node(s)));
            s = t;
        }
    }
    Ok(SetRate { value, lower_bound, exact: value.is_finite(), depth, witness, completion: completion_letters })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopePoint {
    pub c: f64,
    pub n: Option<usize>,
    /// `(1/c) log` of the measured quantity.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpReport {
    pub set: ArcSet,
    pub rate_lower_bound: f64,
    pub exact: bool,
    pub slopes: Vec<SlopePoint>,
    /// Least-squares slope of `log` value against `c` over the fit window.
    pub fit: Option<f64>,
    pub residual: Option<f64>,
    /// `|fit + rate| / rate`, or `|fit|` when the rate is zero.
    pub agreement: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LdpOptions {
    pub eigen: EigenOptions,
    pub maxplus: MaxPlusOptions,
    /// Fit only points with `c ≥ fit_min_c`; defaults to the last half of
    /// the schedule.
    pub fit_min_c: Option<f64>,
    /// Diagonal `n = ⌈c / diagonal_divisor⌉` for the operator rate.
    pub diagonal_divisor: f64,
}

impl Default for LdpOptions {
    fn default() -> Self {
        Self {
            eigen: EigenOptions::default(),
            maxplus: MaxPlusOptions::default(),
            fit_min_c: None,
            diagonal_divisor: 5.0,
        }
    }
}

fn check_schedule(c_schedule: &[f64]) -> Result<()> {
    if c_schedule.is_empty() || c_schedule.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("c schedule must be nonempty, positive and finite"));
    }
    if c_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("c schedule must be strictly increasing"));
    }
    Ok(())
}

fn guarded_subaction(pot: &Potential, grid: &FiberGrid, opts: &LdpOptions) -> Result<Subaction> {
    let sub = solve_maxplus(pot, grid, &opts.maxplus)?;
    if sub.is_degenerate() {
        return Err(Error::HypothesisViolated);
    }
    Ok(sub)
}

fn eigensystems(
    pot: &Potential,
    grid: &FiberGrid,
    c_schedule: &[f64],
    eigen: &EigenOptions,
) -> Result<Vec<EigenSystem>> {
    c_schedule.par_iter().map(|&c| leading_eigensystem(&build_kernel(pot, c, grid)?, eigen)).collect()
}

/// Fits `log value = slope·c + b` over the tail window of `(c, log value)`.
fn tail_fit(points: &[(f64, f64)], fit_min_c: Option<f64>) -> Option<(f64, f64)> {
    let tail: Vec<(f64, f64)> = match fit_min_c {
        Some(c0) => points.iter().copied().filter(|p| p.0 >= c0).collect(),
        None => points[points.len() / 2..].to_vec(),
    };
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    linear_fit(&xs, &ys).map(|(slope, _, rms)| (slope, rms))
}

fn agreement(fit: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        (fit + rate).abs() / rate
    } else {
        fit.abs()
    }
}

fn assemble(
    set: &ArcSet,
    rate: &SetRate,
    slopes: Vec<SlopePoint>,
    logs: &[(f64, f64)],
    opts: &LdpOptions,
    mut notes: Vec<String>,
) -> LdpReport {
    let fitted = tail_fit(logs, opts.fit_min_c);
    if fitted.is_none() {
        notes.push("fewer than two finite points in the fit window".to_string());
    }
    LdpReport {
        set: set.clone(),
        rate_lower_bound: rate.value,
        exact: rate.exact,
        slopes,
        fit: fitted.map(|f| f.0),
        residual: fitted.map(|f| f.1),
        agreement: fitted.map(|f| agreement(f.0, rate.value)),
        notes,
    }
}

/// Slope of `c ↦ log μ_c(set)` against the grid infimum of `R₊^∞`.
pub fn empirical_mu_rate(
    pot: &Potential,
    grid: &FiberGrid,
    set: &ArcSet,
    c_schedule: &[f64],
    opts: &LdpOptions,
) -> Result<LdpReport> {
    check_schedule(c_schedule)?;
    let sub = guarded_subaction(pot, grid, opts)?;
    let rate = set_rate_inf(set, &sub, set.depth().max(1))?;
    let systems = eigensystems(pot, grid, c_schedule, &opts.eigen)?;
    let mut notes = Vec::new();
    let mut slopes = Vec::new();
    let mut logs = Vec::new();
    for es in &systems {
        let lp = es.cylinder_log_prob(set, set.depth())?;
        if lp.is_finite() {
            slopes.push(SlopePoint { c: es.c(), n: None, value: lp / es.c() });
            logs.push((es.c(), lp));
        } else {
            notes.push(format!("μ_c(set) underflows at c = {}; point dropped", es.c()));
        }
    }
    Ok(assemble(set, &rate, slopes, &logs, opts, notes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorRate {
    pub report: LdpReport,
    /// Every `(c, n)` evaluated, diagonal included.
    pub grid_values: Vec<SlopePoint>,
    pub snap_distance: f64,
}

impl OperatorRate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,n,value\n");
        for p in &self.grid_values {
            out.push_str(&format!("{},{},{:.17e}\n", p.c, p.n.unwrap_or(0), p.value));
        }
        out
    }
}

/// `(1/c) log (L_{g_c}^n χ_set)(x)` over a `(c, n)` grid, fitted along the
/// diagonal `n = ⌈c / divisor⌉`.
pub fn empirical_operator_rate(
    pot: &Potential,
    grid: &FiberGrid,
    set: &ArcSet,
    x: &BasePoint,
    c_schedule: &[f64],
    n_schedule: &[usize],
    opts: &LdpOptions,
) -> Result<OperatorRate> {
    check_schedule(c_schedule)?;
    if let Some(&n) = n_schedule.iter().find(|&&n| n < set.depth()) {
        return Err(Error::invalid(format!("n = {n} is smaller than the set depth {}", set.depth())));
    }
    if !(opts.diagonal_divisor > 0.0) {
        return Err(Error::invalid("diagonal divisor must be positive"));
    }
    let sub = guarded_subaction(pot, grid, opts)?;
    let rate = set_rate_inf(set, &sub, set.depth().max(1))?;
    let systems = eigensystems(pot, grid, c_schedule, &opts.eigen)?;
    let diag = |c: f64| ((c / opts.diagonal_divisor).ceil() as usize).max(set.depth()).max(1);

    let mut grid_values = Vec::new();
    let mut slopes = Vec::new();
    let mut logs = Vec::new();
    let mut notes = Vec::new();
    let mut snap_distance = 0.0;
    for es in &systems {
        let c = es.c();
        let mut ns: Vec<usize> = n_schedule.to_vec();
        ns.push(diag(c));
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            let v = es.iterate_indicator_log(x, set, n)?;
            snap_distance = v.snap_distance;
            grid_values.push(SlopePoint { c, n: Some(n), value: v.log_value / c });
            if n == diag(c) {
                if v.log_value.is_finite() {
                    slopes.push(SlopePoint { c, n: Some(n), value: v.log_value / c });
                    logs.push((c, v.log_value));
                } else {
                    notes.push(format!("(L^n χ)(x) underflows at c = {c}, n = {n}; point dropped"));
                }
            }
        }
    }
    Ok(OperatorRate { report: assemble(set, &rate, slopes, &logs, opts, notes), grid_values, snap_distance })
}

#[derive(Debug, Clone, Serialize)]
pub struct LscReport {
    pub n_terms: usize,
    /// `R₊^N(z)`
    pub base_value: f64,
    pub values: Vec<f64>,
    pub distances: Vec<f64>,
    pub tolerances: Vec<f64>,
    /// `min` over the last half of the sequence of `R₊^N(z_j)`.
    pub tail_min: f64,
    /// Sequence indices where `R₊^N(z_j) < R₊^N(z) − tol_j`.
    pub violations: Vec<usize>,
    pub passed: bool,
}

/// Lipschitz constant of `V` with respect to the shift metric, from
/// neighbouring grid differences.
fn v_shift_lipschitz(sub: &Subaction, metric: &ShiftMetric) -> f64 {
    let states = sub.states();
    let n = sub.grid().len();
    let step = ShiftMetric::fiber_distance(0.0, sub.grid().spacing());
    let v = sub.v();
    let mut best: f64 = 0.0;
    for i in 0..states.len() {
        let nodes = states.decode(i);
        for m in 0..states.window() {
            let mut nb = nodes.clone();
            nb[m] = (nb[m] + 1) % n;
            let d = (v[i] - v[states.encode(&nb)]).abs();
            best = best.max(d / (step * metric.theta().powi(m as i32)));
        }
    }
    best
}

/// Hölder-type constant for `R₊` in the shift metric:
/// `|f|_θ + (1 + 1/θ)|V|_θ`.
pub fn r_plus_seminorm(sub: &Subaction, metric: &ShiftMetric) -> f64 {
    sub.potential().holder_seminorm(sub.grid(), metric) + (1.0 + 1.0 / metric.theta()) * v_shift_lipschitz(sub, metric)
}

/// Lower semicontinuity of `R₊^∞` probed along `approach → z`: each
/// `R₊^N(z_j)` must stay above `R₊^N(z) − |R|_θ Σ_{i<N} d(σ^i z_j, σ^i z)`.
pub fn lsc_probe(
    sub: &Subaction,
    z: &BasePoint,
    approach: &[BasePoint],
    n_terms: usize,
    metric: &ShiftMetric,
) -> Result<LscReport> {
    if approach.is_empty() || n_terms == 0 {
        return Err(Error::invalid("lsc probe needs a nonempty sequence and N ≥ 1"));
    }
    let seminorm = r_plus_seminorm(sub, metric);
    let sum_n = |p: &BasePoint| *rate_partial(p, sub, n_terms).partial_sums.last().expect("N ≥ 1");
    let base_value = sum_n(z);
    let mut values = Vec::new();
    let mut distances = Vec::new();
    let mut tolerances = Vec::new();
    for zj in approach {
        values.push(sum_n(zj));
        distances.push(metric.distance(zj, z, METRIC_TERMS)?.upper);
        let mut acc = 0.0;
        for i in 0..n_terms {
            acc += metric.distance(&zj.shift_by(i), &z.shift_by(i), METRIC_TERMS)?.upper;
        }
        tolerances.push(seminorm * acc + 1e-9);
    }
    let violations: Vec<usize> = values
        .iter()
        .zip(&tolerances)
        .enumerate()
        .filter(|(_, (v, t))| **v < base_value - **t)
        .map(|(j, _)| j)
        .collect();
    let tail_min = values[values.len() / 2..].iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LscReport {
        n_terms,
        base_value,
        values,
        distances,
        tolerances,
        tail_min,
        passed: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CancellationEntry {
    pub c: f64,
    pub n: usize,
    pub probe: usize,
    /// `(1/c) log (L_{cR₋}^n 1)(x) − n ε_c / c`
    pub value: f64,
    /// `|(1/c) log (L^n 1)(x) − (1/c) log (L^{n+k} 1)(x)|`
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CancellationReport {
    pub k: usize,
    pub entries: Vec<CancellationEntry>,
}

impl CancellationReport {
    pub fn max_abs_at(&self, c: f64, n: usize) -> Option<f64> {
        self.entries.iter().filter(|e| e.c == c && e.n == n).map(|e| e.value.abs()).reduce(f64::max)
    }
}

/// The `β_c` cancellation: iterates the unnormalized operator with
/// potential `cR₋` on the constant function and removes `n ε_c / c`.
pub fn beta_cancellation_check(
    sub: &Subaction,
    c_schedule: &[f64],
    n_schedule: &[usize],
    probes: &[BasePoint],
    k: usize,
    eigen: &EigenOptions,
) -> Result<CancellationReport> {
    check_schedule(c_schedule)?;
    if n_schedule.is_empty() || probes.is_empty() {
        return Err(Error::invalid("cancellation check needs n values and probes"));
    }
    let pot = sub.potential();
    let grid = sub.grid();
    let states = sub.states();
    let starts: Vec<usize> = probes.iter().map(|x| states.snap(x, grid).0).collect();
    let n_max = n_schedule.iter().copied().max().expect("nonempty") + k;
    let per_c: Vec<Vec<CancellationEntry>> = c_schedule
        .par_iter()
        .map(|&c| -> Result<Vec<CancellationEntry>> {
            let es = leading_eigensystem(&build_kernel(pot, c, grid)?, eigen)?;
            let eps_c = es.log_beta() - c * sub.beta_f();
            let kernel = LogKernel::from_transition_fn(grid, states, c, |i, a| sub.r_minus(i, a))?;
            let mut iterates = vec![vec![0.0; states.len()]];
            for _ in 0..n_max {
                let next = kernel.apply_log(iterates.last().expect("seeded"));
                iterates.push(next);
            }
            let mut out = Vec::new();
            for &n in n_schedule {
                for (p, &s) in starts.iter().enumerate() {
                    let ln = iterates[n][s] / c;
                    out.push(CancellationEntry {
                        c,
                        n,
                        probe: p,
                        value: ln - n as f64 * eps_c / c,
                        offset: (ln - iterates[n + k][s] / c).abs(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(CancellationReport { k, entries: per_c.into_iter().flatten().collect() })
}
