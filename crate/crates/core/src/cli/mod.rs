//! Batch experiment runner: `qsig <subcommand> [--config file] [flags]`.
//!
//! Exit codes: 0 success, 1 assertion or bound violation, 2 usage or
//! configuration error.

mod commands;
pub mod config;
pub mod output;

pub use config::Format;

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "qsig",
    version,
    about = "Pauli-mask encryption with entangled signatures: experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Honest protocol run; exit 0 iff the payload is recovered.
    Roundtrip(CommonArgs),
    /// Exact and closed-form pass probabilities over a grid of attacks (CSV).
    AttackSweep(CommonArgs),
    /// Grid plus refinement maximization of a pass-probability objective.
    BoundSearch(CommonArgs),
    /// Nested encryption: replacement and intercept/resend pass probabilities.
    PrivacyAmp(CommonArgs),
    /// honest, premature_disclosure or baseline_check.
    Scenario(CommonArgs),
    /// Monte Carlo estimate of the pass probability over full protocol runs.
    McEstimate(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Roundtrip(_) => "roundtrip",
            Self::AttackSweep(_) => "attack-sweep",
            Self::BoundSearch(_) => "bound-search",
            Self::PrivacyAmp(_) => "privacy-amp",
            Self::Scenario(_) => "scenario",
            Self::McEstimate(_) => "mc-estimate",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Roundtrip(a)
            | Self::AttackSweep(a)
            | Self::BoundSearch(a)
            | Self::PrivacyAmp(a)
            | Self::Scenario(a)
            | Self::McEstimate(a) => a,
        }
    }
}

/// Flags shared by every subcommand; they override config values.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub grid: Option<u32>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit 2.
    Usage(String),
    /// Exit 1, with the rendered output still emitted.
    Violation(String),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

/// Rendered result of a subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub body: String,
    /// One-line summary for standard error.
    pub summary: String,
    /// `None` when every check held.
    pub violation: Option<String>,
    /// Output path after flags override the config.
    pub out: Option<PathBuf>,
}

/// Runs the subcommand and returns its outcome without writing anything.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    commands::execute(command)
}

/// Parses `args`, runs the subcommand, writes its output and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(CliError::Usage(msg)) | Err(CliError::Violation(msg)) => {
            eprintln!("qsig {}: {msg}", cli.command.name());
            return 2;
        }
    };
    let written = match &outcome.out {
        Some(path) => std::fs::write(path, &outcome.body).map_err(|e| e.to_string()),
        None => {
            print!("{}", outcome.body);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("qsig {}: cannot write output: {e}", cli.command.name());
        return 2;
    }
    eprintln!("{}", outcome.summary);
    match outcome.violation {
        None => 0,
        Some(msg) => {
            eprintln!("qsig {}: check failed: {msg}", cli.command.name());
            1
        }
    }
}
