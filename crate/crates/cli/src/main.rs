//! `juris`: ranking, evaluation, ablation, training-data and prompt commands.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Outcome, USAGE};
use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "juris", version, about = "Neuro-symbolic legal case ranking")]
struct Cli {
    /// Flat TOML file with any of the setting keys below; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the corpus files and print a summary
    Ingest,
    /// Score every candidate, fuse, and write the run and explanation files
    Rank,
    /// Evaluate a run file against the judgments
    Eval,
    /// Compare base, +law, +case and +both fused rankings
    Ablate,
    /// Build predicate-scorer pretraining pairs from cited articles
    PrepTrain,
    /// Build the four charge-prediction prompts per query
    Prompts,
    /// Send prompts to a chat endpoint and score charge accuracy
    LlmEval,
    /// Rulebase utilities
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
    /// Write a synthetic corpus with planted relevance
    Synth,
}

#[derive(Debug, Subcommand)]
enum RulesCommand {
    /// Operator counts over the rulebase
    Stats,
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(path) => settings::load_file(path).map_err(|error| Failure { code: USAGE, error })?,
        None => Settings::default(),
    };
    let s = cli.settings.over(file);
    match cli.command {
        Command::Ingest => commands::ingest(&s),
        Command::Rank => commands::rank(&s),
        Command::Eval => commands::eval(&s),
        Command::Ablate => commands::ablate_cmd(&s),
        Command::PrepTrain => commands::prep_train(&s),
        Command::Prompts => commands::prompts(&s),
        Command::LlmEval => commands::llm_eval(&s),
        Command::Rules { command: RulesCommand::Stats } => commands::rules_stats(&s),
        Command::Synth => commands::synth(&s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {}", describe(&error));
            ExitCode::from(code)
        }
    }
}

/// The error chain joined by ": ", skipping causes already quoted by the
/// message above them.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}
