//! `vrvi`: run solvers on configured instances, verify the tuning rules,
//! and generate instance files.

mod build;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vrvi::verify::Suite;
use vrvi::VrviError;

use config::{parse_seeds, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "vrvi",
    version,
    about = "Variance-reduced solvers for composite variational inequalities"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured solver over every seed and write CSV traces.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Check parameter rules and oracle properties numerically.
    Verify {
        /// One of: oracles, projections, monotonicity, zeroth_order, params, all.
        suite: String,
        /// Also run a deliberately mistuned parameter set, which must fail.
        #[arg(long)]
        inject_violation: bool,
    },
    /// Neyman-Pearson benchmark: perturbed SAVREP against SAVREP-m.
    BenchNp {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Write the configured instance to a binary file.
    Gen {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, VrviError> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Ok(s) = std::env::var("VRVI_SEED") {
        cfg.seeds = parse_seeds(&s).map_err(|e| VrviError::Config(format!("VRVI_SEED: {e}")))?;
    }
    Ok(cfg)
}

fn parse_suites(name: &str) -> Result<Vec<Suite>, VrviError> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    name.parse::<Suite>().map(|s| vec![s])
}

fn run(cli: Cli) -> Result<u8, VrviError> {
    match cli.cmd {
        Cmd::Solve { config } => {
            commands::cmd_solve(&load_config(&config)?)?;
        }
        Cmd::BenchNp { config } => {
            commands::cmd_bench_np(&load_config(&config)?)?;
        }
        Cmd::Gen { config, out } => {
            commands::cmd_gen(&load_config(&config)?, &out)?;
            println!("wrote {}", out.display());
        }
        Cmd::Verify {
            suite,
            inject_violation,
        } => {
            if !commands::cmd_verify(&parse_suites(&suite)?, inject_violation)? {
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                VrviError::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_CONFIG,
            })
        }
    }
}
