//! Experiment runner: simulate | verify | sweep | reduce | smoothness.
//!
//! Exit codes: 0 success (all checks pass), 1 check failure, 2
//! configuration error, 3 numeric failure (non-mixing chain, singular
//! solve). Logging level comes from `COLLABMDP_LOG` (error | info | debug).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl From<collabmdp::Error> for CliError {
    fn from(e: collabmdp::Error) -> Self {
        use collabmdp::Error::*;
        match e {
            NonMixing { .. } | NoConvergence { .. } | SingularSystem { .. } | NonFinite(_) => {
                CliError::Numeric(e.to_string())
            }
            DimensionMismatch(_) | InvalidInput(_) | ScheduleExhausted(_) | ScaleCap { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "collabmdp", version, about = "Two-agent MDP learning experiments")]
struct Cli {
    /// Experiment configuration file (JSON, schema 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent sweep cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes episodes.csv, regret.json, summary.json.
    Simulate,
    /// Run the bound-check suite; exit 0 iff every check passes.
    Verify,
    /// Run a grid of experiments and fit the regret growth exponent.
    Sweep,
    /// Build the MDP and policy schedule for layered-graph rounds and
    /// check the reward/value correspondence.
    Reduce {
        /// Graph-rounds JSON file.
        #[arg(long)]
        graphs: PathBuf,
        /// Overrides the file's escape probability.
        #[arg(long)]
        rho2: Option<f64>,
    },
    /// Emit a smoothness certificate for the configured MDP.
    Smoothness,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    ExperimentConfig::load(path)
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            commands::cmd_simulate(&cfg, &cli.out, seed)
        }
        Command::Verify => {
            let cfg = load_config(cli)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            commands::cmd_verify(&cfg, &cli.out, seed)
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            commands::cmd_sweep(&cfg, &cli.out, seed, cli.jobs)
        }
        Command::Reduce { graphs, rho2 } => commands::cmd_reduce(graphs, *rho2, &cli.out),
        Command::Smoothness => {
            let cfg = load_config(cli)?;
            commands::cmd_smoothness(&cfg, &cli.out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("COLLABMDP_LOG", "info"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            3
        }
    };
    std::process::exit(code);
}
