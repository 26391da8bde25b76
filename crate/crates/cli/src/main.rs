//! `vnm` — command-line front end for the V:N:M sparsity toolkit.
//!
//! Subcommands wire the library into the full workflow: select a (V, M)
//! pattern, permute channels, prune, pack, check and benchmark the sparse
//! matmul, run the training sandbox, and drive everything end to end from
//! a pipeline config. Exit codes: 0 success, 2 validation error (bad
//! inputs, infeasible queries, failed checks), 1 internal error.

mod commands;
mod manifest;
mod pipeline;
mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "internal: {msg}"),
        }
    }
}

impl From<vnm_core::VnmError> for CliError {
    fn from(e: vnm_core::VnmError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn validation<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Internal(format!("creating {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}

#[derive(Parser)]
#[command(name = "vnm", version, about = "V:N:M sparsity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick (V, M) from a measured speedup table under a threshold.
    Select(commands::SelectArgs),
    /// Prune a weight matrix to V:N:M form.
    Prune(commands::PruneArgs),
    /// Channel-permute a weight matrix to raise retained importance.
    Permute(commands::PermuteArgs),
    /// Convert a masked matrix into the packed (A_n, A_i1, A_i2) form.
    Pack(commands::PackArgs),
    /// Verify a packed matrix's spmm against the dense oracle.
    SpmmCheck(commands::SpmmCheckArgs),
    /// Time spmm vs dense matmul and emit a speedup table.
    Bench(commands::BenchArgs),
    /// Run one training-sandbox session.
    TrainToy(commands::TrainToyArgs),
    /// Sweep strategies x seeds and tabulate final losses.
    Ablate(commands::AblateArgs),
    /// Run a full select/permute/prune/train/pack workflow from a config.
    Pipeline(pipeline::PipelineArgs),
    /// Summarize artifacts into the stable report schema.
    Report(report::ReportArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Select(args) => commands::select(args),
        Command::Prune(args) => commands::prune(args),
        Command::Permute(args) => commands::permute(args),
        Command::Pack(args) => commands::pack(args),
        Command::SpmmCheck(args) => commands::spmm_check(args),
        Command::Bench(args) => commands::bench(args),
        Command::TrainToy(args) => commands::train_toy(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Pipeline(args) => pipeline::run(args),
        Command::Report(args) => report::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
