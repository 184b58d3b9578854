//! `arcevo` command line: evolve grid reasoners, score them, resume
//! interrupted runs, and chart convergence logs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::fmt;
use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};

mod checkpoint;
mod commands;
mod config;
mod report;

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or configuration; exit code 2.
    Config(String),
    /// Failure while executing; exit code 1.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(message) | CliError::Runtime(message) => write!(f, "{message}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "arcevo",
    version,
    about = "Island-model evolution strategy for grid-reasoning models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a reasoner from a config file, logging one row per generation
    Run {
        /// Flat key = value config file
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue an interrupted run from a checkpoint
    Resume {
        /// Checkpoint directory or its checkpoint.json
        #[arg(long)]
        checkpoint: PathBuf,
        /// Redirect artifacts to a fresh directory instead of the original
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a genotype or a remote endpoint on one task
    #[command(group(ArgGroup::new("subject").required(true).args(["genotype", "remote"])))]
    Score {
        /// Task file to score against
        #[arg(long)]
        task: PathBuf,
        /// Genotype file (as written to best.genotype)
        #[arg(long)]
        genotype: Option<PathBuf>,
        /// Remote endpoint URL speaking the JSON prompt/answer protocol
        #[arg(long)]
        remote: Option<String>,
        /// Prompt template file with {train_pairs} and {test_input}
        #[arg(long)]
        prompt_template: Option<PathBuf>,
        /// Per-attempt deadline for remote calls, in seconds
        #[arg(long, default_value_t = 10.0)]
        remote_timeout_s: f64,
        /// Transport-failure retries for remote calls
        #[arg(long, default_value_t = 0)]
        remote_retries: u32,
    },
    /// Render a convergence log as an SVG chart
    Report {
        /// curve.csv produced by run/resume
        #[arg(long)]
        log: PathBuf,
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => commands::run(&config, out),
        Command::Resume { checkpoint, out } => commands::resume(&checkpoint, out),
        Command::Score { task, genotype, remote, prompt_template, remote_timeout_s, remote_retries } => {
            commands::score(commands::ScoreArgs {
                task,
                genotype,
                remote,
                prompt_template,
                remote_timeout_s,
                remote_retries,
            })
        }
        Command::Report { log, out } => commands::report(&log, &out),
    };
    if let Err(error) = result {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
