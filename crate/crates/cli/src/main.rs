//! `moduli-lab`: run operator checks, second-variation reports, positivity
//! certificates and projector-derivative sweeps from a JSON manifest.
//!
//! Exit status: 0 when every check passes, 1 when a numerical check fails,
//! 2 for configuration errors.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use moduli_lab::surface::DensityPolicy;

use commands::Outcome;
use config::{ConfigError, ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "moduli-lab", version, about = "Discrete second-variation certificates on the moduli of pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Manifest path, or a shipped preset name (`g2-n1-d0`, `g2-n2-d1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long = "dense-cap", global = true)]
    dense_cap: Option<usize>,

    /// Replace every tolerance in the manifest.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long, global = true, value_enum)]
    density: Option<Density>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Projector algebra, adjointness, kernels and oracle equivalence.
    CheckOperators,
    /// Universal, fibered and difference reports on random quadruples.
    SecondVariation,
    /// Positivity certificates for the restricted difference.
    Positivity,
    /// Finite-difference check of the projector derivative.
    ProjectorDerivative,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Density {
    Uniform,
    Hyperbolic,
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(&outcome.report).map_err(std::io::Error::other)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    for (name, text) in &outcome.files {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, ConfigError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        dense_cap: cli.dense_cap,
        tol: cli.tol,
        density: cli.density.map(|d| match d {
            Density::Uniform => DensityPolicy::Uniform,
            Density::Hyperbolic => DensityPolicy::Hyperbolic,
        }),
    });
    let outcome = match cli.command {
        Command::CheckOperators => commands::check_operators(&cfg),
        Command::SecondVariation => commands::second_variation(&cfg),
        Command::Positivity => commands::positivity(&cfg),
        Command::ProjectorDerivative => commands::projector_derivative(&cfg),
    }?;
    write_outputs(&cfg.out, &outcome).map_err(|e| ConfigError(format!("{}: {e}", cfg.out.display())))?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    match run(&cli) {
        Ok(outcome) => {
            let secs = start.elapsed().as_secs_f64();
            if outcome.failures.is_empty() {
                eprintln!("{:?}: all checks passed ({secs:.1} s)", cli.command);
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("FAIL {} {} {}", f.check, f.sample.map(|s| s.to_string()).unwrap_or_default(), f.detail);
                }
                eprintln!("{:?}: {} failed checks ({secs:.1} s)", cli.command, outcome.failures.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
    }
}
