//! `portmode`: command-line front end for the port-mode antenna toolkit.
//!
//! Every subcommand reads a single TOML run-configuration file that
//! carries all the physics; command-line flags only choose output paths,
//! verbosity and parallelism. Results are written as deterministic CSV
//! (17-significant-digit numbers) plus an optional JSON summary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 infeasible problem (e.g. no feasible matching solution).

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use portmode::{BundleError, MetricsError, MomError, OptimError, PortError, SynthesisError};

#[derive(Parser)]
#[command(name = "portmode", version, about = "Port-mode analysis of lossy multi-port antennas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Parser)]
struct CommonArgs {
    /// Run-configuration file (TOML).
    config: PathBuf,
    /// CSV output path (overrides the config; default: stdout).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary path (overrides the config).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Bundle output directory for `generate` (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress informational stdout lines.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build dipole-array operator bundles from the config.
    Generate(CommonArgs),
    /// Evaluate TARC and efficiencies for a configured excitation.
    Tarc(CommonArgs),
    /// Most efficient excitation per frequency point.
    OptimizeExcitation(CommonArgs),
    /// Perfect-matching circuit solutions with closed-loop TARC.
    Match(CommonArgs),
    /// Matching seeds plus simplex refinement of the shared circuit.
    Refine(CommonArgs),
    /// Realized-gain optimum versus uniform feeding per direction.
    Gain(CommonArgs),
    /// Radiation-efficiency upper bound per frequency point.
    Bound(CommonArgs),
    /// Combinatorial port-placement sweep with strategy a/b/c/d.
    Synthesize(CommonArgs),
    /// Single-port placement scan over candidate basis positions.
    ScanPort(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Generate(a)
            | Command::Tarc(a)
            | Command::OptimizeExcitation(a)
            | Command::Match(a)
            | Command::Refine(a)
            | Command::Gain(a)
            | Command::Bound(a)
            | Command::Synthesize(a)
            | Command::ScanPort(a) => a,
        }
    }
}

/// Process-level error carrying its exit code; the message goes to
/// stderr as a structured diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: "config", message: message.into(), code: 2 }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: "numerical", message: message.into(), code: 3 }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { kind: "infeasible", message: message.into(), code: 4 }
    }

    pub fn io(message: impl std::fmt::Display) -> Self {
        Self { kind: "io", message: message.to_string(), code: 2 }
    }
}

impl From<PortError> for CliError {
    fn from(e: PortError) -> Self {
        match e {
            PortError::Linalg(_) => CliError::numerical(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<MomError> for CliError {
    fn from(e: MomError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NoSuchDirection(..) => CliError::config(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::AllInfeasible => CliError::infeasible(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Port(p) => p.into(),
            _ => CliError::config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.command.args().threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error[config]: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run::dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind, e.message);
            ExitCode::from(e.code)
        }
    }
}
