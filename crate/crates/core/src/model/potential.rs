use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::grid::FiberGrid;
use crate::model::metric::ShiftMetric;
use crate::model::point::Word;

/// One term `cos_coef·cos(Σ j_m x_m) + sin_coef·sin(Σ j_m x_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub freqs: Vec<i32>,
    pub cos_coef: f64,
    pub sin_coef: f64,
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Expr {
    Fourier(Vec<FourierTerm>),
    Custom(EvalFn),
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Fourier(terms) => f.debug_tuple("Fourier").field(terms).finish(),
            Expr::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A real function of the first `arity` coordinates of a point of `X`.
#[derive(Debug, Clone)]
pub struct Potential {
    name: String,
    arity: usize,
    expr: Expr,
    offset: f64,
    holder_seminorm: Option<f64>,
}

impl Potential {
    pub fn zero() -> Self {
        Self::from_fourier("zero", 1, Vec::new()).expect("valid catalog entry")
    }

    /// `cos x₀`
    pub fn cosine() -> Self {
        Self::from_fourier("cosine", 1, vec![term(&[1], 1.0, 0.0)]).expect("valid catalog entry")
    }

    /// `cos(x₀ − x₁)`
    pub fn xy_pair() -> Self {
        Self::from_fourier("xy_pair", 2, vec![term(&[1, -1], 1.0, 0.0)]).expect("valid catalog entry")
    }

    /// `cos(x₀ − x₁) + ε·cos x₀`
    pub fn xy_pinned(eps: f64) -> Self {
        Self::from_fourier("xy_pinned", 2, vec![term(&[1, -1], 1.0, 0.0), term(&[1, 0], eps, 0.0)])
            .expect("valid catalog entry")
    }

    pub fn from_fourier(name: impl Into<String>, arity: usize, terms: Vec<FourierTerm>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::invalid("arity must be positive"));
        }
        for t in &terms {
            if t.freqs.is_empty() || t.freqs.len() > arity {
                return Err(Error::invalid(format!(
                    "Fourier term has {} frequencies for arity {arity}",
                    t.freqs.len()
                )));
            }
            if !t.cos_coef.is_finite() || !t.sin_coef.is_finite() {
                return Err(Error::invalid("Fourier coefficients must be finite"));
            }
        }
        Ok(Self { name: name.into(), arity, expr: Expr::Fourier(terms), offset: 0.0, holder_seminorm: None })
    }

    /// Wraps an arbitrary function. Periodicity is checked by sampling.
    pub fn custom<F>(name: impl Into<String>, arity: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if arity == 0 {
            return Err(Error::invalid("arity must be positive"));
        }
        let pot =
            Self { name: name.into(), arity, expr: Expr::Custom(Arc::new(f)), offset: 0.0, holder_seminorm: None };
        pot.check_periodic(64, 0x5eed)?;
        Ok(pot)
    }

    /// `f + κ`.
    pub fn shifted(&self, kappa: f64) -> Self {
        let mut p = self.clone();
        p.offset += kappa;
        p
    }

    pub fn with_holder_seminorm(mut self, value: f64) -> Self {
        self.holder_seminorm = Some(value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn fourier_terms(&self) -> Option<&[FourierTerm]> {
        match &self.expr {
            Expr::Fourier(t) => Some(t),
            Expr::Custom(_) => None,
        }
    }

    /// Evaluates on the first `arity` entries of `x`; extra entries are ignored.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert!(x.len() >= self.arity);
        let x = &x[..self.arity];
        let body = match &self.expr {
            Expr::Fourier(terms) => terms
                .iter()
                .map(|t| {
                    let phase: f64 = t.freqs.iter().zip(x).map(|(&j, &a)| j as f64 * a).sum();
                    t.cos_coef * phase.cos() + t.sin_coef * phase.sin()
                })
                .sum(),
            Expr::Custom(f) => f(x),
        };
        body + self.offset
    }

    /// Largest `Σ|j_m|` over the Fourier table; `None` for custom potentials.
    pub fn max_frequency(&self) -> Option<u32> {
        self.fourier_terms()
            .map(|terms| terms.iter().map(|t| t.freqs.iter().map(|j| j.unsigned_abs()).sum::<u32>()).max().unwrap_or(0))
    }

    /// Checks 2π-periodicity in every argument at random points (to 1e-10).
    pub fn check_periodic(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = std::f64::consts::TAU;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.arity).map(|_| rng.random_range(0.0..tau)).collect();
            let base = self.eval(&x);
            for m in 0..self.arity {
                let mut y = x.clone();
                y[m] += tau;
                let shifted = self.eval(&y);
                if (shifted - base).abs() > 1e-10 * (1.0 + base.abs()) {
                    return Err(Error::invalid(format!("potential {} is not 2π-periodic in argument {m}", self.name)));
                }
            }
        }
        Ok(())
    }

    /// The supplied Hölder seminorm, or a finite-difference estimate (an
    /// estimate only, not a certificate).
    pub fn holder_seminorm(&self, grid: &FiberGrid, metric: &ShiftMetric) -> f64 {
        self.holder_seminorm.unwrap_or_else(|| self.estimate_holder_seminorm(grid, metric))
    }

    pub fn estimate_holder_seminorm(&self, grid: &FiberGrid, metric: &ShiftMetric) -> f64 {
        // cap the tensor grid so arity-3 estimates stay cheap
        let stride = grid.len().div_ceil(64).max(1);
        let pts: Vec<f64> = grid.nodes().iter().step_by(stride).copied().collect();
        let step = grid.spacing();
        let step_dist = ShiftMetric::fiber_distance(0.0, step);
        let total = pts.len().pow(self.arity as u32);
        let mut best: f64 = 0.0;
        let mut x = vec![0.0; self.arity];
        for flat in 0..total {
            let mut r = flat;
            for xm in x.iter_mut() {
                *xm = pts[r % pts.len()];
                r /= pts.len();
            }
            let base = self.eval(&x);
            for m in 0..self.arity {
                let mut y = x.clone();
                y[m] += step;
                let dist = metric.theta().powi(m as i32) * step_dist;
                best = best.max((self.eval(&y) - base).abs() / dist);
            }
        }
        best
    }

    /// `Σ_{j<n} f(σ^j x)`.
    pub fn birkhoff_sum(&self, w: &Word, n: usize) -> Result<f64> {
        let needed = n + self.arity - 1;
        if let Some(avail) = w.determined_len() {
            if avail < needed {
                return Err(Error::UnderdeterminedWord { needed, available: avail });
            }
        }
        let coords: Vec<f64> = (0..needed).map(|j| w.coord(j).expect("checked above")).collect();
        Ok((0..n).map(|j| self.eval(&coords[j..j + self.arity])).sum())
    }
}

fn term(freqs: &[i32], cos_coef: f64, sin_coef: f64) -> FourierTerm {
    FourierTerm { freqs: freqs.to_vec(), cos_coef, sin_coef }
}
