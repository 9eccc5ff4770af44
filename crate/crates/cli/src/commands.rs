use std::io;

use rayon::prelude::*;
use serde_json::json;
use xylab_core::circle::ks_to_uniform;
use xylab_core::ldp::{
    beta_cancellation_check, empirical_mu_rate, empirical_operator_rate, r_plus_seminorm, rate_partial_capped,
    set_rate_inf,
};
use xylab_core::sampler::{birkhoff_check, birkhoff_ladder, empirical_vs_marginal, sample_chain, w1_scaling};
use xylab_core::zero_temp::{fiber_mass_check, run_scan, selection_report};
use xylab_core::{build_kernel, leading_eigensystem, solve_maxplus, EigenSystem, Error};

use crate::config::{ConfigError, Experiment, Format};
use crate::output::{c_tag, Sink};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::EigenNonConvergence { .. } | Error::MaxPlusNonConvergence { .. }) => 3,
            CliError::Core(Error::HypothesisViolated) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

type Outcome = Result<(), CliError>;

fn state_columns(window: usize) -> String {
    (0..window).map(|m| format!("x{m}")).collect::<Vec<_>>().join(",")
}

pub fn eig(exp: &Experiment, sink: &mut Sink) -> Outcome {
    let opts = exp.eigen_options();
    let systems: Vec<EigenSystem> = exp
        .config
        .c_schedule
        .par_iter()
        .map(|&c| leading_eigensystem(&build_kernel(&exp.potential, c, &exp.grid)?, &opts))
        .collect::<Result<_, _>>()?;
    for es in &systems {
        let tag = format!("eig_c{}", c_tag(es.c()));
        if sink.wants(Format::Json) {
            sink.json(&tag, &es.export())?;
        }
        if sink.wants(Format::Csv) {
            let states = es.states();
            let (h, nu, mu) = (es.h(), es.nu(), es.mu_marginal());
            let mut body = format!("state,{},h,nu,mu\n", state_columns(states.window()));
            for i in 0..states.len() {
                let angles: Vec<String> = states.angles(i, es.grid()).iter().map(|a| format!("{a:.17e}")).collect();
                body.push_str(&format!("{i},{},{:.17e},{:.17e},{:.17e}\n", angles.join(","), h[i], nu[i], mu[i]));
            }
            sink.csv(&tag, &body)?;
        }
        println!(
            "c = {}: log beta = {:.12}, residual = {:.2e}, iterations = {}",
            es.c(),
            es.log_beta(),
            es.residual(),
            es.iterations()
        );
    }
    Ok(())
}

pub fn subaction(exp: &Experiment, sink: &mut Sink) -> Outcome {
    let opts = exp.maxplus_options();
    let sub = solve_maxplus(&exp.potential, &exp.grid, &opts)?;
    let probe = sub.uniqueness_probe(opts.tie_tol);
    if sink.wants(Format::Json) {
        sink.json(
            "subaction",
            &json!({
                "subaction": sub.export(),
                "uniqueness": probe,
                "sweeps": sub.sweeps(),
                "min_r_plus": sub.min_r_plus(),
            }),
        )?;
    }
    if sink.wants(Format::Csv) {
        let states = sub.states();
        let mut body = format!("state,{},V\n", state_columns(states.window()));
        for i in 0..states.len() {
            let angles: Vec<String> = states.angles(i, sub.grid()).iter().map(|a| format!("{a:.17e}")).collect();
            body.push_str(&format!("{i},{},{:.17e}\n", angles.join(","), sub.v()[i]));
        }
        sink.csv("subaction", &body)?;
    }
    println!("beta(f) = {:.12}, residual = {:.2e}, {}", sub.beta_f(), sub.calibration_residual(), probe.verdict);
    Ok(())
}

pub fn scan(exp: &Experiment, sink: &mut Sink) -> Outcome {
    let cfg = &exp.config;
    let scan = run_scan(&exp.potential, &exp.grid, &cfg.c_schedule, &exp.scan_options())?;
    if sink.wants(Format::Csv) {
        sink.csv("scan", &scan.to_csv())?;
    }
    if sink.wants(Format::Json) {
        sink.json("scan", &scan.records)?;
    }
    match selection_report(&scan, cfg.zero_temp.gap) {
        Ok(rep) => {
            println!("selection: passed = {}, final gap = {:.3e}", rep.passed(), rep.final_gap);
            sink.json("selection", &rep)?;
        }
        Err(e) => {
            println!("selection: skipped ({e})");
            sink.json("selection", &json!({ "skipped": e.to_string() }))?;
        }
    }
    let fiber = fiber_mass_check(&scan.systems, &scan.subaction, &cfg.zero_temp.eps_list, &exp.probes)?;
    println!("fiber mass: passed = {}", fiber.passed());
    sink.json("fiber_mass", &fiber)?;
    Ok(())
}

pub fn ldp(exp: &Experiment, sink: &mut Sink) -> Outcome {
    let cfg = &exp.config;
    let opts = exp.ldp_options();
    let sub = solve_maxplus(&exp.potential, &exp.grid, &opts.maxplus)?;
    if sub.is_degenerate() {
        return Err(Error::HypothesisViolated.into());
    }
    let rates: Vec<_> =
        exp.probes.iter().map(|p| rate_partial_capped(p, &sub, cfg.ldp.rate_terms, cfg.ldp.cap)).collect();
    sink.json("rates", &json!({ "probes": rates, "r_plus_seminorm": r_plus_seminorm(&sub, &exp.metric) }))?;

    for (name, set) in &exp.sets {
        let depth = set.depth().max(1);
        let set_rate = set_rate_inf(set, &sub, depth)?;
        let mu = empirical_mu_rate(&exp.potential, &exp.grid, set, &cfg.c_schedule, &opts)?;
        let ns: Vec<usize> = cfg.n_schedule.iter().copied().filter(|&n| n >= set.depth()).collect();
        let op = empirical_operator_rate(&exp.potential, &exp.grid, set, &exp.probes[0], &cfg.c_schedule, &ns, &opts)?;
        let tag = format!("ldp_{name}");
        if sink.wants(Format::Csv) {
            sink.csv(&format!("{tag}_grid"), &op.to_csv())?;
        }
        sink.json(
            &tag,
            &json!({
                "set_rate": set_rate,
                "mu_rate": mu,
                "operator_rate": op.report,
                "operator_grid": if sink.wants(Format::Json) { json!(op.grid_values) } else { json!(null) },
                "snap_distance": op.snap_distance,
            }),
        )?;
        println!(
            "{name}: rate = {:.6}, mu slope = {}, operator slope = {}",
            set_rate.value,
            mu.fit.map_or("n/a".to_string(), |f| format!("{f:.6}")),
            op.report.fit.map_or("n/a".to_string(), |f| format!("{f:.6}")),
        );
    }

    let cancel =
        beta_cancellation_check(&sub, &cfg.c_schedule, &cfg.n_schedule, &exp.probes, cfg.ldp.offset_k, &opts.eigen)?;
    sink.json("cancellation", &cancel)?;
    Ok(())
}

pub fn sample(exp: &Experiment, sink: &mut Sink) -> Outcome {
    if exp.potential.arity() > 2 {
        return Err(ConfigError("`potential.arity`: the sampler supports arity ≤ 2".to_string()).into());
    }
    let s = &exp.config.sampler;
    let es = leading_eigensystem(&build_kernel(&exp.potential, s.c, &exp.grid)?, &exp.eigen_options())?;
    let chain = sample_chain(&es, &exp.chain)?;
    sink.csv("chain", &chain.to_csv())?;
    let birkhoff = birkhoff_check(&chain, &exp.potential, &es);
    let scaling = if s.scaling_seeds > 0 {
        let seeds: Vec<u64> = (0..s.scaling_seeds).map(|k| s.seed.wrapping_add(k + 1)).collect();
        Some(w1_scaling(&es, &exp.chain, &seeds)?)
    } else {
        None
    };
    let ladder = if s.ladder.is_empty() {
        None
    } else {
        let beta = solve_maxplus(&exp.potential, &exp.grid, &exp.maxplus_options())?.beta_f();
        Some(birkhoff_ladder(&exp.potential, &exp.grid, &s.ladder, &exp.chain, &exp.eigen_options(), beta)?)
    };
    let w1 = empirical_vs_marginal(&chain, &es);
    sink.json(
        "sample",
        &json!({
            "c": s.c,
            "seed": chain.seed,
            "length": chain.len(),
            "burn_in": chain.burn_in,
            "birkhoff": birkhoff,
            "w1_to_marginal": w1,
            "ks_to_uniform": ks_to_uniform(&chain.angles),
            "scaling": scaling,
            "ladder": ladder,
            "thresholds": { "birkhoff_sigma": 3.0, "w1_ratio": [1.4, 2.8] },
            "notes": chain.notes,
        }),
    )?;
    println!(
        "sampled {} steps (seed {}): Birkhoff average {:.6} vs {:.6}, W1 = {:.3e}",
        chain.len(),
        chain.seed,
        birkhoff.average,
        birkhoff.expected,
        w1
    );
    Ok(())
}

/// Everything, with the hypothesis-guarded LDP stage last so that a
/// degenerate potential still leaves the other reports on disk.
pub fn all(exp: &Experiment, sink: &mut Sink) -> Outcome {
    eig(exp, sink)?;
    subaction(exp, sink)?;
    scan(exp, sink)?;
    if exp.potential.arity() <= 2 {
        sample(exp, sink)?;
    } else {
        println!("sample: skipped (arity > 2)");
    }
    ldp(exp, sink)
}
