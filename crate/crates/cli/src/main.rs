//! `lindcycle`: span checks, rate profiles, monodromy spectra, limit cycles
//! and canned reproductions for periodically driven Lindblad equations.
//!
//! Exit status: 0 when the verdict is positive, 1 for a negative analytic
//! verdict, 2 for usage or configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Demo;
use config::{Overrides, RunConfig, Settings, UsageError};

#[derive(Parser, Debug)]
#[command(name = "lindcycle", version, about = "Limit cycles of periodically driven open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in model name; overrides the config's model.
    #[arg(long, global = true, value_name = "NAME")]
    model: Option<String>,
    /// Rate grid points.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Propagation slices per unit time.
    #[arg(long, global = true, value_name = "N")]
    slices: Option<usize>,
    /// Horizon for the rate integral.
    #[arg(long, global = true, value_name = "T")]
    horizon: Option<f64>,
    /// Seed for random initial states (falls back to LINDCYCLE_SEED).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for CSV files and report.txt.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a tolerance, e.g. `--tolerance distance_threshold=1e-4`. Repeatable.
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    tolerance: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Windows where the span is self-adjoint and irreducible, and their minimal rate.
    Check,
    /// Decay-rate profile over one period, plus the rate integral with --horizon.
    Rates,
    /// Monodromy spectrum and, when unique, the limit cycle.
    Cycle,
    /// Distance and relative entropy to the reference cycle along a trajectory.
    Evolve,
    /// Canned end-to-end reproduction that checks its own expectations.
    Demo {
        #[arg(value_enum)]
        name: Demo,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let c = cli.common;
    let config = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut overrides = Overrides {
        model: c.model,
        samples: c.samples,
        slices: c.slices,
        horizon: c.horizon,
        seed: c.seed,
        out: c.out,
        tolerances: c.tolerance,
    };
    if let Command::Demo { .. } = cli.command {
        // demos pick their own models; any valid placeholder will do
        overrides.model.get_or_insert_with(|| "driven_qubit".into());
    }
    let settings = Settings::resolve(config, overrides)?;
    log::info!("model {}, seed {}, output {}", settings.model.name, settings.seed, settings.out.display());
    match cli.command {
        Command::Check => commands::check(&settings),
        Command::Rates => commands::rates(&settings),
        Command::Cycle => commands::cycle(&settings),
        Command::Evolve => commands::evolve(&settings),
        Command::Demo { name } => commands::demo(name, &settings),
    }
}

/// Library errors that state a negative fact about the system rather than a bad input.
fn is_analytic(err: &anyhow::Error) -> bool {
    use lindcycle::Error as E;
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<E>(),
            Some(E::DegenerateFixedSpace { .. } | E::NonConvergent { .. } | E::InfiniteEntropy)
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() || !is_analytic(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
