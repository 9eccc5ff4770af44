//! Monte Carlo realization of `μ_c` as a stationary Markov chain whose
//! prepend step draws `a` with density `e^{g_c(ay)}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::grid_w1;
use crate::error::{Error, Result};
use crate::model::{ArcSet, FiberGrid, Potential};
use crate::transfer::{build_kernel, leading_eigensystem, EigenOptions, EigenSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Start {
    Stationary,
    FixedState(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub start: Start,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length <= self.burn_in {
            return Err(Error::invalid(format!("chain length {} must exceed burn-in {}", self.length, self.burn_in)));
        }
        Ok(())
    }
}

/// A sampled point `x₀ x₁ …` in coordinate order: the last letter drawn
/// is `x₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub angles: Vec<f64>,
    pub nodes: Vec<usize>,
    pub seed: u64,
    pub burn_in: usize,
    pub notes: Vec<String>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,angle,node\n");
        for (j, (a, n)) in self.angles.iter().zip(&self.nodes).enumerate() {
            out.push_str(&format!("{j},{a:.17e},{n}\n"));
        }
        out
    }
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&p| p <= u).min(cdf.len() - 1)
}

pub fn sample_chain(es: &EigenSystem, cfg: &ChainConfig) -> Result<Chain> {
    cfg.validate()?;
    let states = es.states();
    if states.window() != 1 {
        return Err(Error::invalid("the sampler supports arity ≤ 2 only"));
    }
    let grid = es.grid();
    let n = grid.len();
    let h = grid.spacing();
    let mut notes = Vec::new();

    let cdfs: Vec<Vec<f64>> = (0..states.len())
        .map(|i| {
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = es
                .transition_row(i)
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            let total = *cdf.last().expect("nonempty row");
            cdf.iter_mut().for_each(|p| *p /= total);
            cdf
        })
        .collect();
    let degenerate =
        cdfs.iter().filter(|cdf| cdf.windows(2).map(|w| w[1] - w[0]).chain([cdf[0]]).any(|p| p > 1.0 - 1e-12)).count();
    if degenerate > 0 {
        notes.push(format!("{degenerate} transition rows put all mass on one cell"));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut state = match cfg.start {
        Start::Stationary => {
            let mut acc = 0.0;
            let cdf: Vec<f64> = es
                .mu_marginal()
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            let u: f64 = rng.random::<f64>() * acc;
            inverse_cdf(&cdf, u)
        }
        Start::FixedState(angle) => grid.snap(angle).0,
    };
    let kept = cfg.length - cfg.burn_in;
    let mut nodes = Vec::with_capacity(kept);
    let mut angles = Vec::with_capacity(kept);
    for step in 0..cfg.length {
        let a = inverse_cdf(&cdfs[state], rng.random::<f64>());
        let jitter: f64 = rng.random::<f64>() - 0.5;
        state = states.target(state, a);
        if step >= cfg.burn_in {
            nodes.push(a);
            angles.push((grid.node(a) + jitter * h).rem_euclid(std::f64::consts::TAU));
        }
    }
    debug_assert!(nodes.iter().all(|&a| a < n));
    nodes.reverse();
    angles.reverse();
    Ok(Chain { angles, nodes, seed: cfg.seed, burn_in: cfg.burn_in, notes })
}

/// Independent chains, one per seed.
pub fn sample_many(es: &EigenSystem, cfg: &ChainConfig, seeds: &[u64]) -> Result<Vec<Chain>> {
    seeds.par_iter().map(|&seed| sample_chain(es, &ChainConfig { seed, ..*cfg })).collect()
}

/// Fraction of positions `j` with `(x_j, x_{j+1}, …)` in the node boxes of `set`.
pub fn box_frequency(chain: &Chain, grid: &FiberGrid, set: &ArcSet) -> f64 {
    let masks = set.node_masks(grid.nodes());
    let d = masks.len();
    if chain.len() < d {
        return f64::NAN;
    }
    let positions = chain.len() + 1 - d;
    let hits = (0..positions).filter(|&j| masks.iter().enumerate().all(|(m, mask)| mask[chain.nodes[j + m]])).count();
    hits as f64 / positions as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffReport {
    pub n: usize,
    pub average: f64,
    pub expected: f64,
    /// Batch-means standard error.
    pub std_error: f64,
    pub z_score: f64,
    pub within_3_sigma: bool,
    pub notes: Vec<String>,
}

const BATCHES: usize = 50;

/// `(1/n) Σ f(σ^j x)` along the chain against `∫ f dμ_c`.
pub fn birkhoff_check(chain: &Chain, pot: &Potential, es: &EigenSystem) -> BirkhoffReport {
    let k = pot.arity();
    let mut notes = Vec::new();
    if chain.len() + chain.burn_in < 10 * chain.burn_in {
        notes.push("chain shorter than ten burn-in lengths".to_string());
    }
    // node angles keep the average on the same grid as `∫ f dμ_c`
    let grid = es.grid();
    let at_nodes: Vec<f64> = chain.nodes.iter().map(|&a| grid.node(a)).collect();
    let values: Vec<f64> = (0..chain.len().saturating_sub(k - 1)).map(|j| pot.eval(&at_nodes[j..j + k])).collect();
    let n = values.len();
    let average = values.iter().sum::<f64>() / n as f64;
    let batch = (n / BATCHES).max(1);
    let means: Vec<f64> = values.chunks_exact(batch).map(|b| b.iter().sum::<f64>() / batch as f64).collect();
    let m = means.len() as f64;
    let var = means.iter().map(|x| (x - average).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let std_error = (var / m).sqrt();
    let expected = es.mean_of(pot);
    let z_score = if std_error > 0.0 { (average - expected) / std_error } else { 0.0 };
    BirkhoffReport { n, average, expected, std_error, z_score, within_3_sigma: z_score.abs() <= 3.0, notes }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    pub beta_f: f64,
    pub rungs: Vec<(f64, BirkhoffReport)>,
    pub increasing: bool,
}

/// Birkhoff averages along an increasing `c` ladder, which should climb
/// toward `β(f)`.
pub fn birkhoff_ladder(
    pot: &Potential,
    grid: &FiberGrid,
    c_ladder: &[f64],
    cfg: &ChainConfig,
    eigen: &EigenOptions,
    beta_f: f64,
) -> Result<LadderReport> {
    let rungs: Vec<(f64, BirkhoffReport)> = c_ladder
        .par_iter()
        .map(|&c| {
            let es = leading_eigensystem(&build_kernel(pot, c, grid)?, eigen)?;
            let chain = sample_chain(&es, cfg)?;
            Ok((c, birkhoff_check(&chain, pot, &es)))
        })
        .collect::<Result<_>>()?;
    let increasing = rungs.windows(2).all(|w| w[1].1.average > w[0].1.average);
    Ok(LadderReport { beta_f, rungs, increasing })
}

/// Empirical `x₀`-marginal of the chain on the grid nodes.
pub fn empirical_marginal(chain: &Chain, n_nodes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_nodes];
    for &a in &chain.nodes {
        counts[a] += 1.0;
    }
    let total = chain.len() as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

/// W1 (radians) between the chain's single-coordinate law and `μ_c`'s.
pub fn empirical_vs_marginal(chain: &Chain, es: &EigenSystem) -> f64 {
    let grid = es.grid();
    grid_w1(grid.nodes(), &empirical_marginal(chain, grid.len()), &es.first_marginal())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub short_length: usize,
    pub seeds: Vec<u64>,
    pub w1_short: f64,
    pub w1_long: f64,
    pub ratio: f64,
    pub in_range: bool,
}

/// Compares mean W1 at `length` and `4·length` over several seeds; the
/// `n^{−1/2}` law predicts a ratio near 2.
pub fn w1_scaling(es: &EigenSystem, cfg: &ChainConfig, seeds: &[u64]) -> Result<ScalingReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("w1 scaling needs at least one seed"));
    }
    let long = ChainConfig { length: cfg.burn_in + 4 * (cfg.length - cfg.burn_in), ..*cfg };
    let mean_w1 = |c: &ChainConfig| -> Result<f64> {
        let chains = sample_many(es, c, seeds)?;
        Ok(chains.iter().map(|ch| empirical_vs_marginal(ch, es)).sum::<f64>() / seeds.len() as f64)
    };
    let w1_short = mean_w1(cfg)?;
    let w1_long = mean_w1(&long)?;
    let ratio = w1_short / w1_long;
    Ok(ScalingReport {
        short_length: cfg.length - cfg.burn_in,
        seeds: seeds.to_vec(),
        w1_short,
        w1_long,
        ratio,
        in_range: (1.4..=2.8).contains(&ratio),
    })
}
