//! Experiment configuration: one TOML file per experiment, unknown keys
//! rejected, everything validated before any computation starts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use xylab_core::ldp::{LdpOptions, DEFAULT_CAP};
use xylab_core::model::CoordConstraint;
use xylab_core::sampler::{ChainConfig, Start};
use xylab_core::transfer::MAX_ARITY;
use xylab_core::zero_temp::{ScanOptions, DEFAULT_SCHEDULE};
use xylab_core::{
    Arc, ArcSet, BasePoint, EigenOptions, FiberGrid, FourierTerm, MaxPlusMethod, MaxPlusOptions, Potential, ShiftMetric,
};

#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("`{field}`: {msg}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_c_schedule")]
    pub c_schedule: Vec<f64>,
    #[serde(default = "default_n_schedule")]
    pub n_schedule: Vec<usize>,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default = "default_sets")]
    pub sets: Vec<SetSpec>,
    #[serde(default = "default_probes")]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub zero_temp: ZeroTempSpec,
    #[serde(default)]
    pub ldp: LdpSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// `zero`, `cosine`, `xy_pair`, `xy_pinned` or `fourier`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Additive constant `κ` in `f + κ`.
    #[serde(default)]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub freqs: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub theta: f64,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { theta: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub name: String,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub arcs: Vec<ArcSpec>,
}

/// Either `center` + `radius` or `start` + `length`, in radians.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub coord: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default)]
    pub head: Vec<f64>,
    pub tail: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub c: f64,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Start from this angle instead of the stationary law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_angle: Option<f64>,
    /// Extra seeds for the `n^{-1/2}` W1 scaling check; zero skips it.
    pub scaling_seeds: u64,
    #[serde(default)]
    pub ladder: Vec<f64>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            c: 10.0,
            length: 100_000,
            burn_in: 1_000,
            seed: 0,
            start_angle: None,
            scaling_seeds: 0,
            ladder: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    ValueIteration,
    PolicyIteration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub maxplus_tol: f64,
    pub maxplus_max_sweeps: usize,
    pub tie_tol: f64,
    pub maxplus_method: MethodSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let e = EigenOptions::default();
        let m = MaxPlusOptions::default();
        Self {
            eigen_tol: e.tol,
            eigen_max_iter: e.max_iter,
            maxplus_tol: m.tol,
            maxplus_max_sweeps: m.max_sweeps,
            tie_tol: m.tie_tol,
            maxplus_method: MethodSpec::ValueIteration,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroTempSpec {
    pub gap: f64,
    pub eps_list: Vec<f64>,
}

impl Default for ZeroTempSpec {
    fn default() -> Self {
        Self { gap: 0.01, eps_list: vec![0.05, 0.1, 0.2] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_min_c: Option<f64>,
    pub diagonal_divisor: f64,
    pub cap: f64,
    /// Terms of `R₊ⁿ` evaluated at each probe.
    pub rate_terms: usize,
    /// Offset `k` in the fixed-`k` cancellation check.
    pub offset_k: usize,
}

impl Default for LdpSpec {
    fn default() -> Self {
        Self { fit_min_c: None, diagonal_divisor: 5.0, cap: DEFAULT_CAP, rate_terms: 50, offset_k: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".to_string(), formats: vec![Format::Json] }
    }
}

fn default_c_schedule() -> Vec<f64> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_n_schedule() -> Vec<usize> {
    vec![1, 5, 10, 20]
}

fn default_sets() -> Vec<SetSpec> {
    vec![SetSpec {
        name: "pi_arc".to_string(),
        open: false,
        arcs: vec![ArcSpec { coord: 0, center: Some(PI), radius: Some(0.5), start: None, length: None }],
    }]
}

fn default_probes() -> Vec<ProbeSpec> {
    [(0.0, 0.0), (0.9, 2.0), (2.1, 5.5), (3.0, 1.2), (4.6, 3.3)]
        .iter()
        .map(|&(a, b)| ProbeSpec { head: vec![a, b], tail: vec![0.4] })
        .collect()
}

/// Validated experiment, with every core object already constructed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub potential: Potential,
    pub grid: FiberGrid,
    pub metric: ShiftMetric,
    pub sets: Vec<(String, ArcSet)>,
    pub probes: Vec<BasePoint>,
    pub chain: ChainConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(self) -> Result<Experiment, ConfigError> {
        let potential = self.build_potential()?;
        if let Some(a) = self.grid.arity {
            if a != potential.arity() {
                return Err(bad("grid.arity", format!("{a} does not match the potential arity {}", potential.arity())));
            }
        }
        if self.grid.n_nodes < 2 {
            return Err(bad("grid.n_nodes", "need at least 2 nodes"));
        }
        let grid = FiberGrid::uniform(self.grid.n_nodes).map_err(|e| bad("grid.n_nodes", e))?;
        let metric = ShiftMetric::new(self.metric.theta).map_err(|e| bad("metric.theta", e))?;

        if self.c_schedule.is_empty() {
            return Err(bad("c_schedule", "must be nonempty"));
        }
        if self.c_schedule.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(bad("c_schedule", "values must be positive and finite"));
        }
        if self.c_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("c_schedule", "must be strictly increasing"));
        }
        if self.n_schedule.contains(&0) {
            return Err(bad("n_schedule", "values must be positive"));
        }

        let mut sets = Vec::new();
        for (k, s) in self.sets.iter().enumerate() {
            let field = format!("sets[{k}]");
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(bad(&format!("{field}.name"), "use letters, digits, '_' or '-'"));
            }
            let mut by_coord: BTreeMap<usize, Vec<Arc>> = BTreeMap::new();
            for (j, a) in s.arcs.iter().enumerate() {
                let f = format!("{field}.arcs[{j}]");
                let arc = match (a.center, a.radius, a.start, a.length) {
                    (Some(c), Some(r), None, None) => Arc::centered(c, r),
                    (None, None, Some(s0), Some(l)) => Arc::new(s0, l),
                    _ => return Err(bad(&f, "give either center and radius, or start and length")),
                }
                .map_err(|e| bad(&f, e))?;
                by_coord.entry(a.coord).or_default().push(arc);
            }
            let constraints = by_coord.into_iter().map(|(coord, arcs)| CoordConstraint { coord, arcs }).collect();
            let set = ArcSet::new(constraints, s.open).map_err(|e| bad(&field, e))?;
            sets.push((s.name.clone(), set));
        }
        let mut names: Vec<&str> = sets.iter().map(|s| s.0.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("sets", "set names must be unique"));
        }

        let probes = self
            .probes
            .iter()
            .enumerate()
            .map(|(k, p)| BasePoint::new(p.head.clone(), p.tail.clone()).map_err(|e| bad(&format!("probes[{k}]"), e)))
            .collect::<Result<Vec<_>, _>>()?;
        if probes.is_empty() {
            return Err(bad("probes", "need at least one probe"));
        }

        let s = &self.sampler;
        if !(s.c > 0.0 && s.c.is_finite()) {
            return Err(bad("sampler.c", "must be positive and finite"));
        }
        let chain = ChainConfig {
            length: s.length,
            burn_in: s.burn_in,
            seed: s.seed,
            start: s.start_angle.map_or(Start::Stationary, Start::FixedState),
        };
        chain.validate().map_err(|e| bad("sampler.length", e))?;
        if s.ladder.iter().any(|&c| !(c > 0.0 && c.is_finite())) || s.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("sampler.ladder", "must be positive and strictly increasing"));
        }

        let sv = &self.solver;
        if !(sv.eigen_tol > 0.0) || !(sv.maxplus_tol > 0.0) || !(sv.tie_tol > 0.0) {
            return Err(bad("solver", "tolerances must be positive"));
        }
        if sv.eigen_max_iter == 0 || sv.maxplus_max_sweeps == 0 {
            return Err(bad("solver", "iteration limits must be positive"));
        }
        let z = &self.zero_temp;
        if !(z.gap > 0.0) || z.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(bad("zero_temp", "gap and eps_list values must be positive"));
        }
        let l = &self.ldp;
        if !(l.diagonal_divisor > 0.0) || !(l.cap > 0.0) || l.rate_terms == 0 {
            return Err(bad("ldp", "diagonal_divisor, cap and rate_terms must be positive"));
        }
        if self.outputs.formats.is_empty() {
            return Err(bad("outputs.formats", "need at least one format"));
        }
        Ok(Experiment { potential, grid, metric, sets, probes, chain, config: self })
    }

    fn build_potential(&self) -> Result<Potential, ConfigError> {
        let p = &self.potential;
        let no_extras = |name: &str| -> Result<(), ConfigError> {
            if p.eps.is_some() || p.arity.is_some() || !p.terms.is_empty() {
                return Err(bad("potential", format!("`{name}` takes no eps, arity or terms")));
            }
            Ok(())
        };
        let pot = match p.name.as_str() {
            "zero" => no_extras("zero").map(|_| Potential::zero())?,
            "cosine" => no_extras("cosine").map(|_| Potential::cosine())?,
            "xy_pair" => no_extras("xy_pair").map(|_| Potential::xy_pair())?,
            "xy_pinned" => {
                if p.arity.is_some() || !p.terms.is_empty() {
                    return Err(bad("potential", "`xy_pinned` takes only eps"));
                }
                let eps = p.eps.ok_or_else(|| bad("potential.eps", "required for xy_pinned"))?;
                if !eps.is_finite() {
                    return Err(bad("potential.eps", "must be finite"));
                }
                Potential::xy_pinned(eps)
            }
            "fourier" => {
                if p.eps.is_some() {
                    return Err(bad("potential.eps", "not used by fourier potentials"));
                }
                let arity = p.arity.ok_or_else(|| bad("potential.arity", "required for fourier"))?;
                if arity == 0 || arity > MAX_ARITY {
                    return Err(bad("potential.arity", format!("must lie in 1..={MAX_ARITY}")));
                }
                if p.terms.is_empty() {
                    return Err(bad("potential.terms", "need at least one term"));
                }
                let terms = p
                    .terms
                    .iter()
                    .map(|t| FourierTerm { freqs: t.freqs.clone(), cos_coef: t.cos, sin_coef: t.sin })
                    .collect();
                Potential::from_fourier("fourier", arity, terms).map_err(|e| bad("potential.terms", e))?
            }
            other => {
                return Err(bad(
                    "potential.name",
                    format!("unknown potential `{other}` (zero, cosine, xy_pair, xy_pinned, fourier)"),
                ))
            }
        };
        if !p.offset.is_finite() {
            return Err(bad("potential.offset", "must be finite"));
        }
        Ok(if p.offset != 0.0 { pot.shifted(p.offset) } else { pot })
    }
}

impl Experiment {
    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions { tol: self.config.solver.eigen_tol, max_iter: self.config.solver.eigen_max_iter }
    }

    pub fn maxplus_options(&self) -> MaxPlusOptions {
        let s = &self.config.solver;
        MaxPlusOptions {
            tol: s.maxplus_tol,
            max_sweeps: s.maxplus_max_sweeps,
            tie_tol: s.tie_tol,
            method: match s.maxplus_method {
                MethodSpec::ValueIteration => MaxPlusMethod::ValueIteration,
                MethodSpec::PolicyIteration => MaxPlusMethod::PolicyIteration,
            },
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions { eigen: self.eigen_options(), maxplus: self.maxplus_options() }
    }

    pub fn ldp_options(&self) -> LdpOptions {
        LdpOptions {
            eigen: self.eigen_options(),
            maxplus: self.maxplus_options(),
            fit_min_c: self.config.ldp.fit_min_c,
            diagonal_divisor: self.config.ldp.diagonal_divisor,
        }
    }
}
