//! Temperature scans `c → ∞`. Gibbs states should select a maximizing
//! measure, and the near-calibrated fiber should keep a uniform share of
//! the circle along the way.

use rayon::prelude::*;
use serde::Serialize;

use crate::circle::grid_w1;
use crate::error::{Error, Result};
use crate::maxplus::{solve_maxplus, MaxPlusOptions, Subaction, UniquenessReport};
use crate::model::{BasePoint, FiberGrid, Potential};
use crate::transfer::{build_kernel, leading_eigensystem, EigenOptions, EigenSystem};

/// Default inverse-temperature schedule.
pub const DEFAULT_SCHEDULE: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];

#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub c: f64,
    pub log_beta_c: f64,
    /// `(1/c) log β_c`
    pub beta_estimate: f64,
    /// `ε_c = log β_c − c β(f)`
    pub eps_c: f64,
    pub eps_c_over_c: f64,
    /// `(1/c) log h_c` on states
    pub v_c: Vec<f64>,
    /// `sup |log h_c − c V|` after matching at the reference state
    pub delta_sup: f64,
    pub delta_sup_over_c: f64,
    /// `∫ f dμ_c`
    pub f_mean: f64,
    /// W1 (radians) from the `x₀` marginal of `μ_c` to the candidate limit
    pub w1_to_limit: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ScanOptions {
    pub eigen: EigenOptions,
    pub maxplus: MaxPlusOptions,
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub subaction: Subaction,
    pub probe: UniquenessReport,
    pub records: Vec<ScanRecord>,
    pub systems: Vec<EigenSystem>,
}

/// One eigensystem per scheduled `c`, summarized against the max-plus limit.
pub fn run_scan(pot: &Potential, grid: &FiberGrid, c_schedule: &[f64], opts: &ScanOptions) -> Result<Scan> {
    let sub = solve_maxplus(pot, grid, &opts.maxplus)?;
    scan_with_subaction(pot, &sub, c_schedule, &opts.eigen)
}

pub fn scan_with_subaction(pot: &Potential, sub: &Subaction, c_schedule: &[f64], eigen: &EigenOptions) -> Result<Scan> {
    if c_schedule.is_empty() {
        return Err(Error::invalid("c schedule is empty"));
    }
    if c_schedule.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("c schedule must be positive and finite"));
    }
    if c_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("c schedule must be strictly increasing"));
    }
    let grid = sub.grid();
    let probe = sub.uniqueness_probe(MaxPlusOptions::default().tie_tol);
    let limit = probe.limit_marginal(sub.states());
    let systems: Vec<EigenSystem> = c_schedule
        .par_iter()
        .map(|&c| leading_eigensystem(&build_kernel(pot, c, grid)?, eigen))
        .collect::<Result<_>>()?;
    let records = systems.iter().map(|es| scan_record(pot, sub, es, &limit)).collect();
    Ok(Scan { subaction: sub.clone(), probe, records, systems })
}

fn scan_record(pot: &Potential, sub: &Subaction, es: &EigenSystem, limit: &[f64]) -> ScanRecord {
    let c = es.c();
    let log_beta = es.log_beta();
    let eps_c = log_beta - c * sub.beta_f();
    let r = sub.reference_state();
    let log_h = es.log_h();
    let v = sub.v();
    let delta_sup = log_h.iter().zip(v).map(|(lh, vi)| ((lh - log_h[r]) - c * (vi - v[r])).abs()).fold(0.0, f64::max);
    ScanRecord {
        c,
        log_beta_c: log_beta,
        beta_estimate: log_beta / c,
        eps_c,
        eps_c_over_c: eps_c / c,
        v_c: log_h.iter().map(|x| x / c).collect(),
        delta_sup,
        delta_sup_over_c: delta_sup / c,
        f_mean: es.mean_of(pot),
        w1_to_limit: grid_w1(es.grid().nodes(), &es.first_marginal(), limit),
        residual: es.residual(),
    }
}

impl Scan {
    /// CSV with columns `c, log_beta_c, beta_estimate, eps_c, eps_c_over_c,
    /// delta_sup_over_c, f_mean, W1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,log_beta_c,beta_estimate,eps_c,eps_c_over_c,delta_sup_over_c,f_mean,W1\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.c,
                r.log_beta_c,
                r.beta_estimate,
                r.eps_c,
                r.eps_c_over_c,
                r.delta_sup_over_c,
                r.f_mean,
                r.w1_to_limit
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub beta_f: f64,
    pub degenerate: bool,
    pub f_mean_nondecreasing: bool,
    /// Indices `k` where `f_mean[k+1] < f_mean[k] − slack`.
    pub monotonicity_violations: Vec<usize>,
    /// Records with `f_mean > β(f) + slack`.
    pub bound_violations: Vec<usize>,
    pub final_gap: f64,
    pub gap_threshold: f64,
    pub gap_ok: bool,
    pub w1_trend: Vec<(f64, f64)>,
    pub w1_nonincreasing: bool,
    pub limit_support: Vec<usize>,
    pub findings: Vec<String>,
}

impl SelectionReport {
    pub fn passed(&self) -> bool {
        !self.degenerate && self.f_mean_nondecreasing && self.bound_violations.is_empty() && self.gap_ok
    }
}

/// Checks that `∫ f dμ_c` climbs to `β(f)` and that the `x₀` marginal of
/// `μ_c` approaches the recurrent class found by the max-plus solver.
pub fn selection_report(scan: &Scan, gap: f64) -> Result<SelectionReport> {
    let recs = &scan.records;
    if recs.len() < 3 {
        return Err(Error::invalid("selection report needs at least 3 scan records"));
    }
    let beta = scan.subaction.beta_f();
    let slack = |r: &ScanRecord| 1e-8 + r.residual;
    let monotonicity_violations: Vec<usize> = recs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].f_mean < w[0].f_mean - slack(&w[1]).max(slack(&w[0])))
        .map(|(k, _)| k)
        .collect();
    let bound_violations: Vec<usize> =
        recs.iter().enumerate().filter(|(_, r)| r.f_mean > beta + slack(r)).map(|(k, _)| k).collect();
    let last = recs.last().expect("checked nonempty");
    let final_gap = beta - last.f_mean;
    let w1_trend: Vec<(f64, f64)> = recs.iter().map(|r| (r.c, r.w1_to_limit)).collect();
    let w1_nonincreasing = w1_trend.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let degenerate = !scan.probe.unique;
    let mut findings = Vec::new();
    if degenerate {
        findings.push("degenerate maximizing set: W1 trend reported, no selection claim".to_string());
    }
    if !monotonicity_violations.is_empty() {
        findings.push(format!("f_mean decreases at {monotonicity_violations:?}"));
    }
    if final_gap >= gap {
        findings.push(format!("gap β(f) − f_mean(c_max) = {final_gap:e} ≥ {gap:e}"));
    }
    Ok(SelectionReport {
        beta_f: beta,
        degenerate,
        f_mean_nondecreasing: monotonicity_violations.is_empty(),
        monotonicity_violations,
        bound_violations,
        final_gap,
        gap_threshold: gap,
        gap_ok: final_gap < gap,
        w1_trend,
        w1_nonincreasing,
        limit_support: scan.probe.critical_states.clone(),
        findings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberMassEntry {
    pub eps: f64,
    /// Smallest scheduled `c` with `e^{−cε + |δ_c|∞} ≤ 1/2`, if any.
    pub c0: Option<f64>,
    pub delta_c0: Option<f64>,
    /// `1 / (3 e^{|δ_{c₀}|∞})`
    pub psi: Option<f64>,
    /// Quadrature (node-count) mass of `{a : R₋(ax) > −ε}` per probe.
    pub node_masses: Vec<f64>,
    /// Length fraction of the same set for the piecewise-linear interpolant
    /// of `a ↦ R₋(ax)` per probe.
    pub masses: Vec<f64>,
    pub min_node_mass: f64,
    pub min_mass: f64,
    /// Probe indices whose node mass falls below `psi` (or is zero).
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberMassReport {
    pub entries: Vec<FiberMassEntry>,
    pub snap_distances: Vec<f64>,
}

impl FiberMassReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.violations.is_empty() && e.psi.is_some())
    }
}

/// `sup |g_c − c R₋|` over grid transitions.
pub fn normalized_defect(es: &EigenSystem, sub: &Subaction) -> f64 {
    let n = es.grid().len();
    let c = es.c();
    (0..es.states().len())
        .flat_map(|i| (0..n).map(move |a| (i, a)))
        .map(|(i, a)| (es.g(i, a) - c * sub.r_minus(i, a)).abs())
        .fold(0.0, f64::max)
}

/// Measure of `{a : r(a) > level}` for the periodic piecewise-linear
/// interpolant through uniform nodes.
fn superlevel_fraction(values: &[f64], level: f64) -> f64 {
    let n = values.len();
    let mut inside = 0.0;
    for j in 0..n {
        let (u, v) = (values[j] - level, values[(j + 1) % n] - level);
        inside += if u > 0.0 && v > 0.0 {
            1.0
        } else if u <= 0.0 && v <= 0.0 {
            0.0
        } else if u > 0.0 {
            u / (u - v)
        } else {
            v / (v - u)
        };
    }
    inside / n as f64
}

/// Mass of the near-calibrated fiber `{a : R₋(ax) > −ε}` at each probe,
/// compared with the fiber-mass constant `ψ_ε = 1/(3 e^{|δ_{c₀}|∞})`, where
/// `δ_c = g_c − c R₋` and `c₀` is the first scheduled `c` with
/// `e^{−c₀ε + |δ_{c₀}|∞} ≤ 1/2`.
pub fn fiber_mass_check(
    systems: &[EigenSystem],
    sub: &Subaction,
    eps_list: &[f64],
    probes: &[BasePoint],
) -> Result<FiberMassReport> {
    if probes.is_empty() {
        return Err(Error::invalid("fiber mass check needs at least one probe"));
    }
    let states = sub.states();
    let grid = sub.grid();
    let n = grid.len();
    let mut ordered: Vec<&EigenSystem> = systems.iter().collect();
    ordered.sort_by(|a, b| a.c().total_cmp(&b.c()));
    let defects: Vec<(f64, f64)> = ordered.iter().map(|es| (es.c(), normalized_defect(es, sub))).collect();

    let snapped: Vec<(usize, f64)> = probes.iter().map(|x| states.snap(x, grid)).collect();
    let entries = eps_list
        .iter()
        .map(|&eps| {
            let chosen = defects.iter().find(|(c, d)| -c * eps + d <= 0.5f64.ln()).copied();
            let psi = chosen.map(|(_, d)| 1.0 / (3.0 * d.exp()));
            let mut node_masses = Vec::new();
            let mut masses = Vec::new();
            for &(s, _) in &snapped {
                let r: Vec<f64> = (0..n).map(|a| sub.r_minus(s, a)).collect();
                node_masses.push((0..n).filter(|&a| r[a] > -eps).map(|a| grid.weights()[a]).sum::<f64>());
                masses.push(superlevel_fraction(&r, -eps));
            }
            let violations = node_masses
                .iter()
                .enumerate()
                .filter(|(_, &m)| m <= 0.0 || psi.is_some_and(|p| m < p))
                .map(|(k, _)| k)
                .collect();
            FiberMassEntry {
                eps,
                c0: chosen.map(|x| x.0),
                delta_c0: chosen.map(|x| x.1),
                psi,
                min_node_mass: node_masses.iter().cloned().fold(f64::INFINITY, f64::min),
                min_mass: masses.iter().cloned().fold(f64::INFINITY, f64::min),
                node_masses,
                masses,
                violations,
            }
        })
        .collect();
    Ok(FiberMassReport { entries, snap_distances: snapped.iter().map(|s| s.1).collect() })
}
