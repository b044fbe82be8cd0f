//! `patspec`: reproducible runs of the PAT spectroscopy simulator and its
//! analysis pipeline.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
//! failure.

mod commands;
mod config;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use patspec::Execution;

use commands::{FitKind, SynthKind};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "patspec",
    version,
    about = "Photon-assisted tunneling spectra of a two-electron double dot"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenenergies versus detuning at one field.
    Levels,
    /// Lock-in Δn over a detuning × field (or drive amplitude) grid.
    Spectrum {
        /// Also fit Lorentzian lines in every row.
        #[arg(long)]
        peaks: bool,
    },
    /// Align a raw scan on its pulse reference and optionally shear to ε.
    Calibrate {
        /// Raw scan CSV (B_T, gate_mV, signal).
        #[arg(long)]
        input: PathBuf,
        /// Shear: none, paper or exact.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Parameter fits on line-distance series or relaxation signals.
    Fit {
        #[arg(value_enum)]
        which: FitKind,
        /// Series CSV (nu_GHz, B_T, kind, delta_eps_ueV, sigma_ueV) or,
        /// for `relax`, (tau_ns, signal).
        #[arg(long)]
        input: PathBuf,
        /// Remanence scenario: singlet, triplet0 or both.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Spin-orbit versus hyperfine matrix-element estimates.
    Mechanism,
    /// Synthetic inputs for the other subcommands.
    Synth {
        #[arg(value_enum)]
        which: SynthKind,
    },
}

/// Error category deciding the exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    use patspec::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::FitFailure { .. }
                | E::NoSteadyState
                | E::Multiplicity { .. }
                | E::UnresolvableLine(_)
                | E::MissingReference { .. } => 3,
                E::InvalidInput(_) | E::Domain(_) | E::NoCrossing { .. } | E::UnreachableField { .. } => 2,
            };
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let exec = Execution::from_threads(cli.threads.or(cfg.threads));
    let out: &Path = &cli.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("config.toml"), cfg.echo()?)?;
    match &cli.command {
        Command::Levels => commands::levels(&cfg, out),
        Command::Spectrum { peaks } => commands::spectrum(&cfg, out, exec, *peaks),
        Command::Calibrate { input, mode } => commands::calibrate(&cfg, out, exec, input, mode.as_deref()),
        Command::Fit { which, input, mode } => commands::fit(&cfg, out, *which, input, mode.as_deref()),
        Command::Mechanism => commands::mechanism(&cfg, out),
        Command::Synth { which } => commands::synth(&cfg, out, exec, *which),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
