//! `capo`: token-level credit assignment and policy optimization pipeline.
//!
//! Subcommands mirror the pipeline stages: `segment` a response into
//! steps, `judge` rollouts with a critique model, `vote` over critiques,
//! `score` rollouts into token rewards and advantages, `simulate` the
//! training dynamics in a synthetic environment, and `report` simulation
//! results. Exit codes: 0 on success, 1 for validation errors, 2 for
//! external-service failures.

mod commands;
mod config;
mod error;
mod records;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::judge::JudgeArgs;
use crate::commands::score::ScoreArgs;
use crate::commands::simulate::SimulateArgs;
use crate::commands::vote::VoteArgs;
use crate::config::EngineConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "capo",
    version,
    about = "Token-level credit assignment and policy optimization pipeline"
)]
struct Cli {
    /// Engine configuration file (TOML). Defaults apply when absent;
    /// command flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a response text into steps and print step JSON.
    Segment {
        /// Response text file.
        #[arg(long)]
        input: PathBuf,
        /// Step delimiter; backslash escapes like "\n\n" are interpreted.
        #[arg(long)]
        delimiter: Option<String>,
    },
    /// Generate or load critiques for every rollout, parsing them into
    /// flagged-step records; optionally embed a vote per rollout.
    Judge {
        /// Rollouts JSONL.
        #[arg(long)]
        rollouts: PathBuf,
        /// Questions JSONL.
        #[arg(long)]
        questions: PathBuf,
        /// Critiques per rollout; overrides the config value.
        #[arg(long)]
        k: Option<usize>,
        /// Vote mode; when set, a vote record is emitted per rollout.
        #[arg(long)]
        vote: Option<String>,
        /// Critique cache path; overrides the config value.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Serve everything from the cache; never contact the endpoint.
        #[arg(long)]
        offline: bool,
        /// Degrade to outcome-only decisions when the endpoint fails.
        #[arg(long)]
        allow_fallback: bool,
        /// Output JSONL path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate critique records into per-rollout vote decisions.
    Vote {
        /// Critiques JSONL (output of `judge`).
        #[arg(long)]
        critiques: PathBuf,
        /// Vote mode; defaults to the config value.
        #[arg(long)]
        vote: Option<String>,
        /// Output JSONL path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Join rollouts with critiques/votes and emit token rewards and
    /// group-normalized advantages.
    Score {
        /// Rollouts JSONL.
        #[arg(long)]
        rollouts: PathBuf,
        /// Critiques/votes JSONL (output of `judge` or `vote`).
        #[arg(long)]
        critiques: PathBuf,
        /// Whole-response reward weight (C).
        #[arg(long = "c")]
        w_whole: Option<f64>,
        /// Process penalty weight (P).
        #[arg(long = "p")]
        w_process: Option<f64>,
        /// Vote mode recount override.
        #[arg(long)]
        vote: Option<String>,
        /// Score rollouts without critiques as outcome-only instead of
        /// failing the join.
        #[arg(long)]
        allow_fallback: bool,
        /// Output JSONL path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the experiment grid of a spec file in the synthetic
    /// environment.
    Simulate {
        /// Experiment spec (TOML). Without it, the engine config's sim
        /// settings drive a default credit-assignment-vs-baseline run.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Master seed; every run derives its own sub-seed from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; overrides the config value.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a simulation output directory.
    Report {
        /// Directory holding summary.csv and trace files.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let engine = EngineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Segment { input, delimiter } => {
            commands::segment::run(&input, delimiter.as_deref())
        }
        Command::Judge {
            rollouts,
            questions,
            k,
            vote,
            cache,
            offline,
            allow_fallback,
            output,
        } => commands::judge::run(
            &JudgeArgs {
                rollouts,
                questions,
                k,
                vote,
                cache,
                offline,
                allow_fallback,
                output,
            },
            &engine,
        ),
        Command::Vote {
            critiques,
            vote,
            output,
        } => commands::vote::run(
            &VoteArgs {
                critiques,
                vote,
                output,
            },
            &engine,
        ),
        Command::Score {
            rollouts,
            critiques,
            w_whole,
            w_process,
            vote,
            allow_fallback,
            output,
        } => commands::score::run(
            &ScoreArgs {
                rollouts,
                critiques,
                w_whole,
                w_process,
                vote,
                allow_fallback,
                output,
            },
            &engine,
        ),
        Command::Simulate { spec, seed, out } => {
            commands::simulate::run(&SimulateArgs { spec, seed, out }, &engine)
        }
        Command::Report { dir } => commands::report::run(&dir),
    }
}
