//! Batch driver for the `isac-aoi` library: bounds, α optimization,
//! parameter sweeps and simulation, with CSV output.

use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use isac_aoi::{Error as CoreError, GainMode};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod sweep;
pub mod table;

pub use config::Loaded;
pub use sweep::{Outputs, Quantity, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "isac-aoi", version, about = "Peak-AoI violation bounds and simulation for ISAC V2I links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Parameter file (`key = value` lines, `#` comments).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one parameter; repeatable, applied after the file and environment.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Base RNG seed; replication r uses seed + r
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write the CSV result here.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Packets per simulation run (default 100000)
    #[arg(long, global = true)]
    pub packets: Option<usize>,

    /// Independent simulation runs pooled into one estimate
    #[arg(long, global = true)]
    pub replications: Option<usize>,

    /// Print CSV on stdout instead of the table.
    #[arg(long, global = true)]
    pub csv: bool,

    /// Add a wall-clock runtime column (makes output non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PAVP bound at the configured α (θ optimized unless `theta` is set).
    Bound,
    /// Minimize the bound over the power split α.
    Optimize,
    /// Run the `sweep.*` experiment described in the config.
    Sweep,
    /// Discrete-event simulation of the configured system.
    Simulate {
        /// Per-packet trace CSV (first replication only).
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        #[arg(long, default_value = "per-packet")]
        gain_mode: GainMode,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Unstable(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    /// 0 success, 2 config error, 3 infeasible or unstable, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Parse { .. }
                | CoreError::UnknownKey(_)
                | CoreError::OutOfRange { .. }
                | CoreError::InvalidArgument(_)
                | CoreError::TauTooLow { .. }
                | CoreError::AllPowerToComm
                | CoreError::AllPowerToSensing => 2,
                CoreError::ChannelNeverAcceptable { .. }
                | CoreError::MgfDiverges { .. }
                | CoreError::NoFeasibleAlpha
                | CoreError::NonProgress(_) => 3,
                CoreError::NonPositiveRate { .. } | CoreError::Numerical(_) => 4,
            },
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Execute a parsed command line. `env` supplies `ISAC_AOI_*` overrides;
/// the human-readable report goes to `stdout`.
pub fn run<W: Write>(cli: &Cli, env: Vec<(String, String)>, stdout: &mut W) -> Result<(), CliError> {
    let loaded = config::load(cli, env)?;
    match &cli.command {
        Command::Bound => commands::cmd_bound(cli, &loaded, stdout),
        Command::Optimize => commands::cmd_optimize(cli, &loaded, stdout),
        Command::Sweep => commands::cmd_sweep(cli, &loaded, stdout),
        Command::Simulate { trace, gain_mode } => {
            commands::cmd_simulate(cli, &loaded, *gain_mode, trace.as_deref(), stdout)
        }
    }
}
