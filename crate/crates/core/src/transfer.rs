//! Discretized Ruelle operator `L_{cf}` on the grid, its leading eigendata
//! and the Gibbs state, all kept in the log domain.
//!
//! For a potential of arity `k` the operator acts on functions of the first
//! `k-1` coordinates (one coordinate for `k = 1`), so the quadrature of
//! `(L w)(x) = ∫ e^{c f(ax)} w(ax) dm(a)` closes on a finite state space.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArcSet, BasePoint, FiberGrid, Potential};
use crate::numerics::logsumexp;
use crate::states::StateSpace;

/// Largest arity handled by the tensor state space.
pub const MAX_ARITY: usize = 3;

/// Default cap on the depth of cylinders passed to [`gibbs_cylinder`].
pub const DEFAULT_MAX_CYLINDER_DEPTH: usize = 8;

/// Log-kernel `K(i, a) = log w_a + c·f(a, state_i)`, stored row-major over
/// (state, letter). Prepending letter `a` to state `i` lands in
/// `states.target(i, a)`.
#[derive(Debug, Clone)]
pub struct LogKernel {
    grid: FiberGrid,
    states: StateSpace,
    c: f64,
    entries: Vec<f64>,
    warnings: Vec<String>,
}

impl LogKernel {
    /// Builds `log w_a + c·phi(i, a)` for an arbitrary transition function.
    pub fn from_transition_fn<F>(grid: &FiberGrid, states: StateSpace, c: f64, phi: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        if !c.is_finite() {
            return Err(Error::invalid(format!("inverse temperature must be finite, got {c}")));
        }
        let n = grid.len();
        let log_w: Vec<f64> = grid.weights().iter().map(|w| w.ln()).collect();
        let mut entries = vec![0.0; states.len() * n];
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (a, e) in row.iter_mut().enumerate() {
                let v = phi(i, a);
                *e = log_w[a] + if c == 0.0 { 0.0 } else { c * v };
            }
        });
        if let Some(bad) = entries.iter().find(|e| !e.is_finite()) {
            return Err(Error::invalid(format!("non-finite kernel entry {bad}")));
        }
        Ok(Self { grid: grid.clone(), states, c, entries, warnings: Vec::new() })
    }

    pub fn grid(&self) -> &FiberGrid {
        &self.grid
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_letters(&self) -> usize {
        self.grid.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, i: usize, a: usize) -> f64 {
        self.entries[i * self.grid.len() + a]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn row_logsum(&self, i: usize) -> f64 {
        logsumexp(self.row(i))
    }

    /// `log (L w)` from `log w`.
    pub fn apply_log(&self, log_w: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let states = self.states;
        let mut out = vec![0.0; self.n_states()];
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let row = &self.entries[i * n..(i + 1) * n];
            let mut max = f64::NEG_INFINITY;
            for (a, k) in row.iter().enumerate() {
                max = max.max(k + log_w[states.target(i, a)]);
            }
            *o = if max == f64::NEG_INFINITY {
                max
            } else {
                let s: f64 = row.iter().enumerate().map(|(a, k)| (k + log_w[states.target(i, a)] - max).exp()).sum();
                max + s.ln()
            };
        });
        out
    }

    /// Transpose action on measures: `out_t = log Σ_{(i,a) → t} v_i e^{K(i,a)}`,
    /// with letters outside `letter_mask` discarded.
    pub fn push_log(&self, log_v: &[f64], letter_mask: Option<&[bool]>) -> Vec<f64> {
        let n = self.grid.len();
        let states = self.states;
        let mut out = vec![0.0; self.n_states()];
        out.par_iter_mut().enumerate().for_each(|(t, o)| {
            let a = t % n;
            if letter_mask.is_some_and(|m| !m[a]) {
                *o = f64::NEG_INFINITY;
                return;
            }
            let mut max = f64::NEG_INFINITY;
            for i in states.predecessors(t) {
                max = max.max(log_v[i] + self.entries[i * n + a]);
            }
            *o = if max == f64::NEG_INFINITY {
                max
            } else {
                let s: f64 = states.predecessors(t).map(|i| (log_v[i] + self.entries[i * n + a] - max).exp()).sum();
                max + s.ln()
            };
        });
        out
    }

    /// Dense linear-domain matrix `M[i][t]` with `(L w)_i = Σ_t M[i][t] w_t`.
    /// Only sensible for small grids and moderate `c`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.n_states();
        let mut dense = vec![vec![0.0; m]; m];
        for (i, row) in dense.iter_mut().enumerate() {
            for a in 0..self.n_letters() {
                row[self.states.target(i, a)] += self.entry(i, a).exp();
            }
        }
        dense
    }
}

/// Assembles the log-kernel of `L_{c·pot}` on `grid`.
pub fn build_kernel(pot: &Potential, c: f64, grid: &FiberGrid) -> Result<LogKernel> {
    if pot.arity() > MAX_ARITY {
        return Err(Error::invalid(format!("arity {} exceeds the supported maximum {MAX_ARITY}", pot.arity())));
    }
    let states = StateSpace::for_arity(grid.len(), pot.arity());
    let window_angles: Vec<Vec<f64>> = (0..states.len()).map(|i| states.angles(i, grid)).collect();
    let arity = pot.arity();
    let mut kernel = LogKernel::from_transition_fn(grid, states, c, |i, a| {
        let mut args = Vec::with_capacity(arity.max(2));
        args.push(grid.node(a));
        args.extend_from_slice(&window_angles[i]);
        pot.eval(&args)
    })?;
    if let Some(freq) = pot.max_frequency() {
        // Fourier content of e^{c f} decays like e^{-k²/(2 c j²)}; ~8.6√c modes
        // per unit frequency reach double precision.
        let needed = (freq as f64 * (1.0 + 8.6 * c.abs().sqrt())).ceil() as usize;
        if grid.len() < needed {
            kernel.warnings.push(format!(
                "grid of {} nodes may under-resolve e^(c f) at c = {c}; about {needed} nodes suggested",
                grid.len()
            ));
        }
    }
    Ok(kernel)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenOptions {
    /// Convergence threshold on successive `log β` estimates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000 }
    }
}

impl EigenOptions {
    fn residual_tol(&self) -> f64 {
        (10.0 * self.tol).max(1e-11)
    }
}

/// Leading eigendata of one kernel plus the derived Gibbs quantities.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    kernel: LogKernel,
    normalized: LogKernel,
    log_beta: f64,
    log_h: Vec<f64>,
    log_nu: Vec<f64>,
    log_mu: Vec<f64>,
    residual: f64,
    adjoint_residual: f64,
    iterations: usize,
}

/// Power iteration for `L h = β h` and `L* ν = β ν`, renormalizing each sweep.
pub fn leading_eigensystem(kernel: &LogKernel, opts: &EigenOptions) -> Result<EigenSystem> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("eigen tolerance must be positive"));
    }
    let m = kernel.n_states();
    let log_cell = kernel.states().log_cell_mass();
    let res_tol = opts.residual_tol();

    // ∫ h dm = 1 with uniform cell mass means logsumexp(log_h) = -log_cell
    let mut log_h = vec![0.0; m];
    let mut log_beta = f64::NAN;
    let mut iterations = 0;
    let mut last_res = f64::INFINITY;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::EigenNonConvergence { c: kernel.c(), iterations, residual: last_res });
        }
        iterations += 1;
        let y = kernel.apply_log(&log_h);
        let lb = logsumexp(&y) + log_cell;
        let mut res: f64 = 0.0;
        for (h, yi) in log_h.iter_mut().zip(&y) {
            let new = yi - lb;
            res = res.max((new - *h).abs());
            *h = new;
        }
        let step = (lb - log_beta).abs();
        log_beta = lb;
        last_res = res;
        if step < opts.tol && res < res_tol {
            break;
        }
    }

    let y = kernel.apply_log(&log_h);
    log_beta = logsumexp(&y) + log_cell;
    let residual = y.iter().zip(&log_h).map(|(yi, hi)| (yi - log_beta - hi).abs()).fold(0.0, f64::max);

    let mut log_nu = vec![-(m as f64).ln(); m];
    let mut adjoint_residual = f64::INFINITY;
    let mut adj_iter = 0;
    while adjoint_residual >= res_tol {
        if adj_iter >= opts.max_iter {
            return Err(Error::EigenNonConvergence { c: kernel.c(), iterations: adj_iter, residual: adjoint_residual });
        }
        adj_iter += 1;
        let y = kernel.push_log(&log_nu, None);
        let s = logsumexp(&y);
        adjoint_residual = 0.0;
        for (v, yi) in log_nu.iter_mut().zip(&y) {
            let new = yi - s;
            adjoint_residual = adjoint_residual.max((new - *v).abs());
            *v = new;
        }
    }

    let log_mu = {
        let raw: Vec<f64> = log_h.iter().zip(&log_nu).map(|(h, v)| h + v).collect();
        let z = logsumexp(&raw);
        raw.into_iter().map(|x| x - z).collect()
    };

    let states = kernel.states();
    let normalized = LogKernel::from_transition_fn(kernel.grid(), states, 1.0, |i, a| {
        let log_w = kernel.grid().weights()[a].ln();
        kernel.entry(i, a) - log_w + log_h[states.target(i, a)] - log_h[i] - log_beta
    })?;

    Ok(EigenSystem {
        kernel: kernel.clone(),
        normalized,
        log_beta,
        log_h,
        log_nu,
        log_mu,
        residual,
        adjoint_residual,
        iterations,
    })
}

/// Serialized form of an [`EigenSystem`].
#[derive(Debug, Clone, Serialize)]
pub struct EigenExport {
    pub c: f64,
    pub log_beta_c: f64,
    pub residual: f64,
    pub iterations: usize,
    pub nodes: Vec<f64>,
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu_marginal: Vec<f64>,
    pub log_h: Vec<f64>,
    pub log_nu: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Value of `log (L_{g_c}^n χ)(x)` with the grid snap that produced it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IteratedValue {
    pub log_value: f64,
    pub snap_distance: f64,
}

impl EigenSystem {
    pub fn c(&self) -> f64 {
        self.kernel.c()
    }

    pub fn kernel(&self) -> &LogKernel {
        &self.kernel
    }

    /// Kernel of `L_{g_c}`: entries `log w_a + g_c(a, i)`.
    pub fn normalized_kernel(&self) -> &LogKernel {
        &self.normalized
    }

    pub fn grid(&self) -> &FiberGrid {
        self.kernel.grid()
    }

    pub fn states(&self) -> StateSpace {
        self.kernel.states()
    }

    pub fn log_beta(&self) -> f64 {
        self.log_beta
    }

    /// `sup_i |log (L h)_i − log β − log h_i|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn adjoint_residual(&self) -> f64 {
        self.adjoint_residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn log_h(&self) -> &[f64] {
        &self.log_h
    }

    /// Eigenfunction with `∫ h dm = 1`. May underflow at large `c`; prefer `log_h`.
    pub fn h(&self) -> Vec<f64> {
        self.log_h.iter().map(|x| x.exp()).collect()
    }

    pub fn log_nu(&self) -> &[f64] {
        &self.log_nu
    }

    /// Eigenmeasure masses on states, summing to 1.
    pub fn nu(&self) -> Vec<f64> {
        self.log_nu.iter().map(|x| x.exp()).collect()
    }

    pub fn log_mu(&self) -> &[f64] {
        &self.log_mu
    }

    /// `μ_c = h ν` on states, summing to 1.
    pub fn mu_marginal(&self) -> Vec<f64> {
        self.log_mu.iter().map(|x| x.exp()).collect()
    }

    /// Marginal of `μ_c` on the coordinate `x₀`, indexed by grid node.
    pub fn first_marginal(&self) -> Vec<f64> {
        let states = self.states();
        let mut out = vec![0.0; self.grid().len()];
        for (i, lm) in self.log_mu.iter().enumerate() {
            out[states.first_node(i)] += lm.exp();
        }
        out
    }

    /// `g_c(a, i)` for prepending letter `a` to state `i`.
    pub fn g(&self, i: usize, a: usize) -> f64 {
        self.normalized.entry(i, a) - self.grid().weights()[a].ln()
    }

    /// Transition probabilities `w_a e^{g_c(a, i)}` out of state `i`.
    pub fn transition_row(&self, i: usize) -> Vec<f64> {
        self.normalized.row(i).iter().map(|x| x.exp()).collect()
    }

    /// `∫ φ(ax) dμ_c(x)` over states and letters; equals `∫ φ dμ_c` by invariance.
    pub fn integrate_transitions<F>(&self, phi: F) -> f64
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = self.grid().len();
        // per-state terms in parallel, summed in order so results do not
        // depend on the thread count
        let terms: Vec<f64> = (0..self.log_mu.len())
            .into_par_iter()
            .map(|i| {
                let mu = self.log_mu[i].exp();
                if mu == 0.0 {
                    return 0.0;
                }
                let row = self.normalized.row(i);
                mu * (0..n).map(|a| row[a].exp() * phi(i, a)).sum::<f64>()
            })
            .collect();
        terms.iter().sum()
    }

    /// `∫ f dμ_c`.
    pub fn mean_of(&self, pot: &Potential) -> f64 {
        let states = self.states();
        let grid = self.grid();
        self.integrate_transitions(|i, a| {
            let mut args = vec![grid.node(a)];
            args.extend(states.angles(i, grid));
            pot.eval(&args)
        })
    }

    /// `μ_c` pushed one step through the prepend chain (equals `μ_c` when stationary).
    pub fn push_marginal(&self) -> Vec<f64> {
        self.normalized.push_log(&self.log_mu, None).into_iter().map(|x| x.exp()).collect()
    }

    /// `log (L_{g_c}^n 1)` at every state.
    pub fn iterate_one_log(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.states().len()];
        for _ in 0..n {
            v = self.normalized.apply_log(&v);
        }
        v
    }

    /// `log μ_c(set)` at grid resolution, for sets of depth at most `max_depth`.
    pub fn cylinder_log_prob(&self, set: &ArcSet, max_depth: usize) -> Result<f64> {
        let depth = set.depth();
        if depth > max_depth {
            return Err(Error::invalid(format!("cylinder depth {depth} exceeds the configured maximum {max_depth}")));
        }
        if depth == 0 {
            return Ok(0.0);
        }
        let states = self.states();
        let masks = set.node_masks(self.grid().nodes());
        let w = states.window();
        let n_pre = depth.saturating_sub(w);
        let mut v: Vec<f64> = (0..states.len())
            .map(|i| {
                let ok = states
                    .decode(i)
                    .iter()
                    .enumerate()
                    .all(|(m, &node)| masks.get(n_pre + m).is_none_or(|mask| mask[node]));
                if ok {
                    self.log_mu[i]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        for s in 1..=n_pre {
            v = self.normalized.push_log(&v, Some(&masks[n_pre - s]));
        }
        Ok(logsumexp(&v))
    }

    /// `log (L_{g_c}^n χ_set)(x)`, starting from the grid state nearest `x`.
    pub fn iterate_indicator_log(&self, x: &BasePoint, set: &ArcSet, n: usize) -> Result<IteratedValue> {
        let depth = set.depth();
        if n < depth {
            return Err(Error::invalid(format!("n = {n} is smaller than the set depth {depth}")));
        }
        let states = self.states();
        let (start, snap_distance) = states.snap(x, self.grid());
        let masks = set.node_masks(self.grid().nodes());
        let mut v = vec![f64::NEG_INFINITY; states.len()];
        v[start] = 0.0;
        // the m-th prepended letter becomes coordinate n - m of a_n … a_1 x
        for m in 1..=n {
            v = self.normalized.push_log(&v, masks.get(n - m).map(|mask| mask.as_slice()));
        }
        Ok(IteratedValue { log_value: logsumexp(&v), snap_distance })
    }

    pub fn export(&self) -> EigenExport {
        EigenExport {
            c: self.c(),
            log_beta_c: self.log_beta,
            residual: self.residual,
            iterations: self.iterations,
            nodes: self.grid().nodes().to_vec(),
            h: self.h(),
            nu: self.nu(),
            mu_marginal: self.mu_marginal(),
            log_h: self.log_h.clone(),
            log_nu: self.log_nu.clone(),
            warnings: self.kernel.warnings().to_vec(),
        }
    }

    /// `g_c` as CSV, one row per state and one column per letter.
    pub fn g_matrix_csv(&self) -> String {
        let n = self.grid().len();
        let mut out = String::new();
        for i in 0..self.states().len() {
            let row: Vec<String> = (0..n).map(|a| format!("{:.17e}", self.g(i, a))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `μ_c(boxes)` at grid resolution; cylinders deeper than
/// [`DEFAULT_MAX_CYLINDER_DEPTH`] are rejected.
pub fn gibbs_cylinder(es: &EigenSystem, boxes: &ArcSet) -> Result<f64> {
    es.cylinder_log_prob(boxes, DEFAULT_MAX_CYLINDER_DEPTH).map(f64::exp)
}

/// `log (L_{g_c}^n χ_set)(x)`.
pub fn apply_ln_indicator(es: &EigenSystem, x: &BasePoint, set: &ArcSet, n: usize) -> Result<IteratedValue> {
    es.iterate_indicator_log(x, set, n)
}
