//! `xylab`: batch driver for transfer-operator, zero-temperature and
//! large-deviation experiments on XY-type potentials.

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{ConfigError, ExperimentConfig, Format};
use crate::output::Sink;

#[derive(Parser)]
#[command(name = "xylab", version, about = "Numerical lab for XY models on the circle shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `outputs.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel solvers.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Table format, overriding `outputs.formats`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Leading eigendata of the transfer operator for each c.
    Eig,
    /// Max-plus eigenvalue β(f), calibrated subaction and uniqueness probe.
    Subaction,
    /// Temperature scan with selection and fiber-mass reports.
    Scan,
    /// Rate function values and empirical large-deviation slopes.
    Ldp,
    /// Markov-chain sample of the Gibbs state.
    Sample,
    /// All of the above.
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| ConfigError("`--config` is required".to_string()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(out) = cli.out {
        cfg.outputs.dir = out.to_string_lossy().into_owned();
    }
    if let Some(f) = cli.format {
        cfg.outputs.formats = vec![f];
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("`--threads` must be positive".to_string()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("`--threads`: {e}")))?;
    }
    let resolved = cfg.to_json();
    let exp = cfg.validate()?;
    let dir = PathBuf::from(&exp.config.outputs.dir);
    let mut sink = Sink::new(&dir, &exp.config.outputs.formats, resolved)?;
    let outcome = match cli.command {
        Command::Eig => commands::eig(&exp, &mut sink),
        Command::Subaction => commands::subaction(&exp, &mut sink),
        Command::Scan => commands::scan(&exp, &mut sink),
        Command::Ldp => commands::ldp(&exp, &mut sink),
        Command::Sample => commands::sample(&exp, &mut sink),
        Command::All => commands::all(&exp, &mut sink),
    };
    for p in sink.written() {
        println!("wrote {}", p.display());
    }
    outcome
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xylab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
