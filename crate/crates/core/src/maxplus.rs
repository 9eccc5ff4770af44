//! Zero-temperature eigendata: the max-plus eigenproblem
//! `max_a [f(ay) + V(ay)] = V(y) + β(f)` on the grid.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FiberGrid, Potential};
use crate::numerics::wrap_angle;
use crate::states::StateSpace;
use crate::transfer::MAX_ARITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MaxPlusMethod {
    /// Relative value iteration with Krasnoselskii–Mann averaging.
    ValueIteration,
    /// Howard policy iteration for multichain max-plus problems.
    PolicyIteration,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaxPlusOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Absolute tolerance for recording ties in the argmax sets.
    pub tie_tol: f64,
    pub method: MaxPlusMethod,
}

impl Default for MaxPlusOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_sweeps: 1_000_000, tie_tol: 1e-9, method: MaxPlusMethod::ValueIteration }
    }
}

/// `f(a, state_i)` for every state and letter, row-major.
pub fn payoff_table(pot: &Potential, grid: &FiberGrid, states: StateSpace) -> Vec<f64> {
    let n = grid.len();
    let mut table = vec![0.0; states.len() * n];
    for i in 0..states.len() {
        let mut args = vec![0.0];
        args.extend(states.angles(i, grid));
        for a in 0..n {
            args[0] = grid.node(a);
            table[i * n + a] = pot.eval(&args);
        }
    }
    table
}

/// `β(f)` and a calibrated subaction `V` on grid states.
#[derive(Debug, Clone)]
pub struct Subaction {
    pot: Potential,
    grid: FiberGrid,
    states: StateSpace,
    payoff: Vec<f64>,
    beta_f: f64,
    v: Vec<f64>,
    reference_state: usize,
    calibration_residual: f64,
    argmax_policy: Vec<Vec<usize>>,
    tie_tol: f64,
    sweeps: usize,
}

/// Solves the max-plus eigenproblem of `pot` on `grid`.
pub fn solve_maxplus(pot: &Potential, grid: &FiberGrid, opts: &MaxPlusOptions) -> Result<Subaction> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("max-plus tolerance must be positive"));
    }
    if pot.arity() > MAX_ARITY {
        return Err(Error::invalid(format!("arity {} is not supported", pot.arity())));
    }
    let states = StateSpace::for_arity(grid.len(), pot.arity());
    let payoff = payoff_table(pot, grid, states);
    // state of the all-zero window, i.e. the node at angle 0
    let reference_state = 0;
    let (beta_f, mut v, sweeps) = match opts.method {
        MaxPlusMethod::ValueIteration => value_iteration(&payoff, states, reference_state, opts)?,
        MaxPlusMethod::PolicyIteration => policy_iteration(&payoff, states, opts)?,
    };
    let shift = v[reference_state];
    v.iter_mut().for_each(|x| *x -= shift);

    let mut sub = Subaction {
        pot: pot.clone(),
        grid: grid.clone(),
        states,
        payoff,
        beta_f,
        v,
        reference_state,
        calibration_residual: 0.0,
        argmax_policy: Vec::new(),
        tie_tol: opts.tie_tol,
        sweeps,
    };
    sub.calibration_residual = sub.residual();
    sub.argmax_policy = sub.argmax_sets(opts.tie_tol);
    Ok(sub)
}

fn bellman(payoff: &[f64], states: StateSpace, w: &[f64], out: &mut [f64]) {
    let n = states.n_nodes();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &payoff[i * n..(i + 1) * n];
        *o = row.iter().enumerate().map(|(a, f)| f + w[states.target(i, a)]).fold(f64::NEG_INFINITY, f64::max);
    }
}

fn value_iteration(
    payoff: &[f64],
    states: StateSpace,
    reference: usize,
    opts: &MaxPlusOptions,
) -> Result<(f64, Vec<f64>, usize)> {
    let m = states.len();
    let mut w = vec![0.0; m];
    let mut tw = vec![0.0; m];
    let mut span = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        bellman(payoff, states, &w, &mut tw);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (t, x) in tw.iter().zip(&w) {
            let d = t - x;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        span = hi - lo;
        if span < opts.tol {
            return Ok((0.5 * (hi + lo), w, sweep));
        }
        // averaging removes oscillation along critical cycles of period > 1
        for (x, t) in w.iter_mut().zip(&tw) {
            *x = 0.5 * (*x + t);
        }
        let r = w[reference];
        w.iter_mut().for_each(|x| *x -= r);
    }
    Err(Error::MaxPlusNonConvergence { sweeps: opts.max_sweeps, span })
}

/// Gain `η` and bias `V` of a fixed policy: every state follows its letter
/// into a cycle; `η` is that cycle's mean and `V(i) = r(i) − η + V(next(i))`.
fn evaluate_policy(payoff: &[f64], states: StateSpace, policy: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let m = states.len();
    let n = states.n_nodes();
    let next: Vec<usize> = (0..m).map(|i| states.target(i, policy[i])).collect();
    let reward: Vec<f64> = (0..m).map(|i| payoff[i * n + policy[i]]).collect();
    let mut eta = vec![f64::NAN; m];
    let mut bias = vec![f64::NAN; m];
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut mark = vec![0u8; m];
    for start in 0..m {
        if mark[start] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut i = start;
        while mark[i] == 0 {
            mark[i] = 1;
            path.push(i);
            i = next[i];
        }
        if mark[i] == 1 {
            // new cycle starting at i
            let pos = path.iter().position(|&p| p == i).expect("on path");
            let cycle = &path[pos..];
            let mean = cycle.iter().map(|&c| reward[c]).sum::<f64>() / cycle.len() as f64;
            let anchor = *cycle.iter().min().expect("nonempty cycle");
            let k = cycle.iter().position(|&c| c == anchor).expect("anchor on cycle");
            bias[anchor] = 0.0;
            eta[anchor] = mean;
            // walk backwards around the cycle from the anchor
            for step in 1..cycle.len() {
                let c = cycle[(k + cycle.len() - step) % cycle.len()];
                bias[c] = reward[c] - mean + bias[next[c]];
                eta[c] = mean;
            }
            for &c in cycle {
                mark[c] = 2;
            }
            path.truncate(pos);
        }
        for &p in path.iter().rev() {
            eta[p] = eta[next[p]];
            bias[p] = reward[p] - eta[p] + bias[next[p]];
            mark[p] = 2;
        }
    }
    (eta, bias)
}

fn policy_iteration(payoff: &[f64], states: StateSpace, opts: &MaxPlusOptions) -> Result<(f64, Vec<f64>, usize)> {
    let m = states.len();
    let n = states.n_nodes();
    let eps = opts.tol.max(1e-13);
    let mut policy: Vec<usize> = (0..m)
        .map(|i| {
            let row = &payoff[i * n..(i + 1) * n];
            (0..n).fold(0, |best, a| if row[a] > row[best] { a } else { best })
        })
        .collect();
    for round in 1..=opts.max_sweeps {
        let (eta, bias) = evaluate_policy(payoff, states, &policy);
        let mut changed = false;
        for i in 0..m {
            let best_eta = (0..n).map(|a| eta[states.target(i, a)]).fold(f64::NEG_INFINITY, f64::max);
            if best_eta > eta[i] + eps {
                policy[i] = (0..n).find(|&a| eta[states.target(i, a)] >= best_eta - eps).expect("maximum is attained");
                changed = true;
            }
        }
        if !changed {
            for i in 0..m {
                let mut best = bias[i];
                let mut choice = policy[i];
                for a in 0..n {
                    let t = states.target(i, a);
                    if (eta[t] - eta[i]).abs() > eps {
                        continue;
                    }
                    let val = payoff[i * n + a] - eta[i] + bias[t];
                    if val > best + eps {
                        best = val;
                        choice = a;
                    }
                }
                if choice != policy[i] {
                    policy[i] = choice;
                    changed = true;
                }
            }
        }
        if !changed {
            let beta = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let spread = eta.iter().cloned().fold(f64::INFINITY, f64::min);
            if beta - spread > eps {
                // every state reaches every other in one prepend, so gains must agree
                return Err(Error::MaxPlusNonConvergence { sweeps: round, span: beta - spread });
            }
            return Ok((beta, bias, round));
        }
    }
    Err(Error::MaxPlusNonConvergence { sweeps: opts.max_sweeps, span: f64::NAN })
}

/// Outcome of the recurrent-class analysis of the argmax policy graph.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    /// Strongly connected classes of the policy graph that carry a cycle.
    pub recurrent_classes: Vec<Vec<usize>>,
    /// States on which `R₊` vanishes along some policy cycle.
    pub critical_states: Vec<usize>,
    pub unique: bool,
    pub verdict: String,
}

impl UniquenessReport {
    /// Candidate zero-temperature limit of the `x₀` marginal: uniform over
    /// the first coordinates of the critical states.
    pub fn limit_marginal(&self, states: StateSpace) -> Vec<f64> {
        let mut out = vec![0.0; states.n_nodes()];
        let w = 1.0 / self.critical_states.len().max(1) as f64;
        for &s in &self.critical_states {
            out[states.first_node(s)] += w;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubactionExport {
    pub beta_f: f64,
    pub nodes: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub residual: f64,
    pub degenerate: bool,
    pub recurrent_class: Vec<usize>,
}

impl Subaction {
    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn grid(&self) -> &FiberGrid {
        &self.grid
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn beta_f(&self) -> f64 {
        self.beta_f
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn reference_state(&self) -> usize {
        self.reference_state
    }

    pub fn calibration_residual(&self) -> f64 {
        self.calibration_residual
    }

    pub fn argmax_policy(&self) -> &[Vec<usize>] {
        &self.argmax_policy
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn payoff(&self, i: usize, a: usize) -> f64 {
        self.payoff[i * self.grid.len() + a]
    }

    /// `R₊(a·y) = β + V(y) − V(a·y) − f(a·y)` for `y` = state `i`.
    pub fn r_plus(&self, i: usize, a: usize) -> f64 {
        self.beta_f + self.v[i] - self.v[self.states.target(i, a)] - self.payoff(i, a)
    }

    pub fn r_minus(&self, i: usize, a: usize) -> f64 {
        -self.r_plus(i, a)
    }

    /// Smallest `R₊` over all grid transitions.
    pub fn min_r_plus(&self) -> f64 {
        let n = self.grid.len();
        (0..self.states.len())
            .flat_map(|i| (0..n).map(move |a| (i, a)))
            .map(|(i, a)| self.r_plus(i, a))
            .fold(f64::INFINITY, f64::min)
    }

    fn residual(&self) -> f64 {
        let n = self.grid.len();
        (0..self.states.len())
            .map(|i| {
                let best = (0..n)
                    .map(|a| self.payoff(i, a) + self.v[self.states.target(i, a)])
                    .fold(f64::NEG_INFINITY, f64::max);
                (best - self.v[i] - self.beta_f).abs()
            })
            .fold(0.0, f64::max)
    }

    fn argmax_sets(&self, tie_tol: f64) -> Vec<Vec<usize>> {
        let n = self.grid.len();
        (0..self.states.len())
            .map(|i| {
                let vals: Vec<f64> = (0..n).map(|a| self.payoff(i, a) + self.v[self.states.target(i, a)]).collect();
                let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (0..n).filter(|&a| vals[a] >= best - tie_tol).collect()
            })
            .collect()
    }

    /// `V` at an arbitrary window by periodic multilinear interpolation.
    pub fn v_at(&self, window: &[f64]) -> f64 {
        let w = self.states.window();
        let n = self.grid.len();
        let h = self.grid.spacing();
        let mut lower = vec![0usize; w];
        let mut frac = vec![0.0; w];
        for m in 0..w {
            let p = wrap_angle(window[m]) / h;
            let j = p.floor();
            lower[m] = (j as usize) % n;
            frac[m] = p - j;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << w) {
            let mut weight = 1.0;
            let mut idx = vec![0usize; w];
            for m in 0..w {
                if corner >> m & 1 == 1 {
                    weight *= frac[m];
                    idx[m] = (lower[m] + 1) % n;
                } else {
                    weight *= 1.0 - frac[m];
                    idx[m] = lower[m];
                }
            }
            if weight != 0.0 {
                total += weight * self.v[self.states.encode(&idx)];
            }
        }
        total
    }

    /// Recurrent classes of the argmax graph at tie tolerance `tol`.
    pub fn uniqueness_probe(&self, tol: f64) -> UniquenessReport {
        let sets = if tol == self.tie_tol { self.argmax_policy.clone() } else { self.argmax_sets(tol) };
        let m = self.states.len();
        let mut graph = DiGraph::<usize, ()>::with_capacity(m, m);
        let idx: Vec<_> = (0..m).map(|i| graph.add_node(i)).collect();
        for (i, letters) in sets.iter().enumerate() {
            for &a in letters {
                graph.add_edge(idx[i], idx[self.states.target(i, a)], ());
            }
        }
        let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
            .map(|scc| {
                let mut c: Vec<usize> = scc.into_iter().map(|n| graph[n]).collect();
                c.sort_unstable();
                c
            })
            .collect();
        classes.sort();
        let simple_cycle = |class: &Vec<usize>| {
            class.iter().all(|&i| {
                sets[i].iter().filter(|&&a| class.binary_search(&self.states.target(i, a)).is_ok()).count() == 1
            })
        };
        let unique = classes.len() == 1 && simple_cycle(&classes[0]);
        let mut critical: Vec<usize> = classes.iter().flatten().copied().collect();
        critical.sort_unstable();
        UniquenessReport {
            recurrent_classes: classes,
            critical_states: critical,
            unique,
            verdict: if unique { "uniqueness plausible" } else { "degenerate" }.to_string(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.uniqueness_probe(self.tie_tol).unique
    }

    pub fn export(&self) -> SubactionExport {
        let probe = self.uniqueness_probe(self.tie_tol);
        SubactionExport {
            beta_f: self.beta_f,
            nodes: self.grid.nodes().to_vec(),
            v: self.v.clone(),
            residual: self.calibration_residual,
            degenerate: !probe.unique,
            recurrent_class: probe.critical_states,
        }
    }
}

/// Best periodic orbit found by exhaustive search.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitWitness {
    pub mean: f64,
    /// One period of the orbit, as angles.
    pub orbit: Vec<f64>,
}

/// Largest admissible `n_nodes^max_period`.
pub const ORBIT_SEARCH_GUARD: u128 = 10_000_000;

/// Exhaustive search over all grid orbits of period at most `max_period`.
/// The best mean is a lower bound for `β(f)` at grid resolution.
pub fn periodic_orbit_oracle(pot: &Potential, grid: &FiberGrid, max_period: usize) -> Result<OrbitWitness> {
    if max_period == 0 {
        return Err(Error::invalid("max_period must be at least 1"));
    }
    let n = grid.len();
    if (n as u128).checked_pow(max_period as u32).is_none_or(|s| s > ORBIT_SEARCH_GUARD) {
        return Err(Error::SearchGuard(format!("{n}^{max_period} orbits exceed the limit of {ORBIT_SEARCH_GUARD}")));
    }
    let states = StateSpace::for_arity(n, pot.arity());
    let payoff = payoff_table(pot, grid, states);
    let w = states.window();
    let mut best = OrbitWitness { mean: f64::NEG_INFINITY, orbit: Vec::new() };
    let mut window = vec![0usize; w];
    for period in 1..=max_period {
        let mut word = vec![0usize; period];
        loop {
            // Σ_j f(z_j, …) with z periodic; f(z_j …) = payoff(state of σ^{j+1} z, z_j)
            let mut sum = 0.0;
            for j in 0..period {
                for (m, slot) in window.iter_mut().enumerate() {
                    *slot = word[(j + 1 + m) % period];
                }
                sum += payoff[states.encode(&window) * n + word[j]];
            }
            let mean = sum / period as f64;
            if mean > best.mean {
                best = OrbitWitness { mean, orbit: word.iter().map(|&j| grid.node(j)).collect() };
            }
            // odometer
            let mut k = 0;
            while k < period {
                word[k] += 1;
                if word[k] < n {
                    break;
                }
                word[k] = 0;
                k += 1;
            }
            if k == period {
                break;
            }
        }
    }
    Ok(best)
}
