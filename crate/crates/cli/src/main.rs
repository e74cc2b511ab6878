//! lpvsteer: speed-scheduled robust preview steering synthesis toolkit.

mod commands;
mod config;
mod schedule_file;
mod trace_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ToolConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("synthesis infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Simulation(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn from_core(e: lpvsteer_core::Error) -> Self {
        use lpvsteer_core::Error as E;
        match e {
            E::Synthesis(m) => CliError::Infeasible(m),
            E::Domain(m) | E::Config(m) => CliError::Config(m),
            E::Simulation { message, .. } => CliError::Simulation(message),
            other => CliError::Other(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lpvsteer",
    version,
    about = "Gain-scheduled robust preview steering: model building, LQ/H∞ synthesis, verification, simulation"
)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config key by dotted path, e.g. --set vehicle.m=1450
    #[arg(long = "set", global = true, action = clap::ArgAction::Append)]
    set: Vec<String>,
    /// Synthesis mode shorthand (overrides synthesis.mode)
    #[arg(long, global = true, value_parser = ["lq", "hinf-common-p", "hinf-paper"])]
    mode: Option<String>,
    /// Uncertain family shorthand (overrides synthesis.uncertain)
    #[arg(long, global = true, value_parser = ["on", "off"])]
    uncertain: Option<String>,
    /// Seed recorded in outputs (reserved for randomized scenarios)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct and dump the vehicle/road/augmented model matrices
    Model,
    /// Synthesize a gain schedule (LQ and/or vertex-LMI H∞)
    Synth,
    /// Verify a schedule file: grid stability, pole region, norm bound
    Check {
        /// Schedule file (defaults to <out>/schedule.json)
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Run the configured scenarios under a schedule file
    Simulate {
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Export a schedule as plain CSV tables
    Export {
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ToolConfig, CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", cli.config.display())))?;
    let mut overrides = cli.set.clone();
    if let Some(mode) = &cli.mode {
        overrides.push(format!("synthesis.mode={mode}"));
    }
    if let Some(unc) = &cli.uncertain {
        overrides.push(format!(
            "synthesis.uncertain={}",
            if unc == "on" { "true" } else { "false" }
        ));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    ToolConfig::parse(&text, &overrides)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let result = (|| -> Result<u8, CliError> {
        let config = load_config(&cli)?;
        let schedule_default = cli.out.join("schedule.json");
        match &cli.command {
            Command::Model => {
                commands::cmd_model(&config, &cli.out)?;
                Ok(0)
            }
            Command::Synth => {
                commands::cmd_synth(&config, &cli.out)?;
                Ok(0)
            }
            Command::Check { schedule } => {
                let path = schedule.clone().unwrap_or(schedule_default);
                let ok = commands::cmd_check(&config, &path, &cli.out)?;
                Ok(if ok { 0 } else { 4 })
            }
            Command::Simulate { schedule } => {
                let path = schedule.clone().unwrap_or(schedule_default);
                commands::cmd_simulate(&config, &path, &cli.out)?;
                Ok(0)
            }
            Command::Export { schedule } => {
                let path = schedule.clone().unwrap_or(schedule_default);
                commands::cmd_export(&path, &cli.out)?;
                Ok(0)
            }
        }
    })();

    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
