//! `qsdlab` — command-line front end for the population-SDE laboratory.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 bad usage or
//! configuration, 3 numerical failure at run time.

mod config;
mod run;

use clap::{Parser, Subcommand};
use config::RunConfig;
use run::{CliError, Io, OracleKind, Suite};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qsdlab",
    version,
    about = "Numerical laboratory for 1-D population SDEs with environmental \
             and demographic noise: Gibbs densities, scale-function exit \
             formulas, quasi-stationary spectra, absorbed-path Monte Carlo, \
             and small-noise asymptotic sweeps."
)]
struct Cli {
    /// TOML run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "qsdlab-out")]
    out: PathBuf,

    /// Override the base RNG seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for path ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Audit the model against the standing assumptions and classify
    /// the regime by the sign of the stochastic growth rate.
    CheckModel,
    /// Tabulate Gibbs densities u_eps (and the stationary limit when it
    /// exists).
    Gibbs {
        /// Noise levels (repeatable); defaults to [spectral].eps.
        #[arg(long = "eps")]
        eps: Vec<f64>,
    },
    /// Tabulate scale/speed densities and closed-form exit statistics.
    Scale {
        #[arg(long = "eps")]
        eps: Vec<f64>,
    },
    /// Solve the transformed eigenproblem: rates, QSD tables, or a
    /// closed-form oracle check.
    Spectrum {
        #[arg(long = "eps")]
        eps: Vec<f64>,
        /// Check the solver against an exactly solvable potential
        /// instead of the configured model.
        #[arg(long, value_enum)]
        oracle: Option<OracleKind>,
    },
    /// Sample absorbed paths; write per-path extinction times.
    Simulate {
        /// Also run the Fleming-Viot particle system and write the
        /// empirical quasi-stationary density.
        #[arg(long)]
        fv: bool,
    },
    /// Run asymptotic-law verification sweeps over the eps ladder.
    Sweep {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Shrink ladders and path counts for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// Re-read a sweep summary and restate the verdict index.
    Report,
}

fn dispatch(cli: &Cli) -> run::CliResult {
    if let Some(n) = cli.threads {
        qsdlab::exec::configure_threads(n).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed)?;
    let cmd_name = match &cli.cmd {
        Cmd::CheckModel => "check-model",
        Cmd::Gibbs { .. } => "gibbs",
        Cmd::Scale { .. } => "scale",
        Cmd::Spectrum { .. } => "spectrum",
        Cmd::Simulate { .. } => "simulate",
        Cmd::Sweep { .. } => "sweep",
        Cmd::Report => "report",
    };
    let io = Io::new(&cli.out, &cfg, cmd_name)?;
    match &cli.cmd {
        Cmd::CheckModel => run::cmd_check_model(&cfg, &io),
        Cmd::Gibbs { eps } => run::cmd_gibbs(&cfg, &io, eps),
        Cmd::Scale { eps } => run::cmd_scale(&cfg, &io, eps),
        Cmd::Spectrum { eps, oracle } => run::cmd_spectrum(&cfg, &io, eps, *oracle),
        Cmd::Simulate { fv } => run::cmd_simulate(&cfg, &io, *fv),
        Cmd::Sweep { suite, quick } => run::cmd_sweep(&cfg, &io, *suite, *quick),
        Cmd::Report => run::cmd_report(&io),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
