use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{ConventionName, RunConfig, VariantName};

#[derive(Debug, Parser)]
#[command(name = "chos", version, about = "Light storage by controlled homogeneous splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    overrides: Overrides,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Optical depth; a comma-separated list for `sweep` and `optimize`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub b: Vec<f64>,
    /// Splitting in units of γ; a comma-separated list for `sweep`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub delta: Vec<f64>,
    #[arg(long, global = true)]
    pub sigma_tau: Option<f64>,
    #[arg(long, global = true)]
    pub t_off: Option<f64>,
    #[arg(long, global = true)]
    pub t_on: Option<f64>,
    /// Ramp duration of the splitting switch; 0 switches in one step.
    #[arg(long, global = true)]
    pub ramp: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantName>,
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionName>,
    /// Worker threads for `sweep` and `optimize`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Keep every STRIDE-th space-time frame.
    #[arg(long, global = true, value_name = "STRIDE")]
    pub snapshots: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Susceptibility and transmission against probe detuning.
    Spectrum,
    /// Propagation at constant splitting.
    Slowlight,
    /// Storage and retrieval with the splitting switched off and on.
    Store,
    /// Fidelity heatmap over optical depth and splitting.
    Sweep,
    /// Best splitting per optical depth and the fidelity-curve fit.
    Optimize {
        /// Add the b = 6e4 point to the ladder.
        #[arg(long)]
        full_scale: bool,
    },
    /// Figures for the built-in media or a custom one from the config.
    Estimate {
        /// sr or pryso.
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Solver(m) => write!(f, "solver: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<chos_core::Error> for CliError {
    fn from(e: chos_core::Error) -> Self {
        use chos_core::Error as E;
        match e {
            E::Validation { .. } | E::Config(_) | E::RegimeViolation { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    commands::apply_overrides(&mut cfg, &cli.overrides, matches!(cli.command, Command::Sweep | Command::Optimize { .. }))?;
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &cli.overrides),
        Command::Slowlight => commands::slowlight(&cfg, &cli.overrides),
        Command::Store => commands::store(&cfg, &cli.overrides),
        Command::Sweep => commands::sweep(&cfg, &cli.overrides),
        Command::Optimize { full_scale } => {
            if full_scale {
                cfg.optimize.full_scale = true;
            }
            commands::optimize(&cfg, &cli.overrides)
        }
        Command::Estimate { preset } => {
            if preset.is_some() {
                cfg.estimate.preset = preset;
            }
            commands::estimate(&cfg, &cli.overrides)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chos: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
