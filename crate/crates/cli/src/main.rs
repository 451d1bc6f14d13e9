mod commands;
mod config;
mod demos;
mod table;

use clap::{Args, Parser, Subcommand};
use commands::Outcome;
use config::Overrides;
use demos::Demo;
use std::path::PathBuf;
use std::process::ExitCode;

/// Quantum decision problems: axiom checks, counterexample search, utility
/// elicitation and representation checks.
#[derive(Parser)]
#[command(name = "branchwise", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem file with `rules` and `scenarios` arrays.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Witnesses per search cell.
    #[arg(long, global = true, value_name = "N")]
    budget: Option<usize>,
    /// Write the JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "EPS")]
    tolerance_eq: Option<f64>,
    #[arg(long, global = true, value_name = "EPS")]
    tolerance_tie: Option<f64>,
}

#[derive(Args, Clone, Copy)]
struct Anchors {
    /// Utility assigned to the best reward.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    anchor_best: f64,
    /// Utility assigned to the worst reward.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    anchor_worst: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run every axiom against every configured rule.
    CheckAxioms,
    /// Run the config's scenarios and/or built-in scenarios by name.
    FindCounterexample {
        /// Built-in scenario names; all of them when neither these nor
        /// --config are given.
        names: Vec<String>,
    },
    /// Elicit a utility function from a rule's verdicts.
    ElicitUtility {
        /// Rule name from the config; the first rule by default.
        #[arg(long)]
        rule: Option<String>,
        #[command(flatten)]
        anchors: Anchors,
    },
    /// Check that a rule's verdicts follow expected utility under its
    /// elicited utility.
    VerifyRepresentation {
        #[arg(long)]
        rule: Option<String>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        anchors: Anchors,
    },
    /// Build the chain of acts that takes two acts with equal reward
    /// functions to the same final state.
    EquivalenceChain,
    /// Run a worked example.
    Demo {
        #[arg(value_enum)]
        name: Demo,
    },
    /// Re-execute the witness in a violation or scenario report.
    Replay { report: PathBuf },
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let c = &cli.common;
    let o = Overrides {
        seed: c.seed,
        budget: c.budget,
        tolerance_eq: c.tolerance_eq,
        tolerance_tie: c.tolerance_tie,
    };
    let config = c.config.as_deref();
    match &cli.command {
        Command::CheckAxioms => commands::check_axioms(config, &o),
        Command::FindCounterexample { names } => commands::find_counterexample(config, names, &o),
        Command::ElicitUtility { rule, anchors } => {
            commands::elicit(config, rule.as_deref(), (anchors.anchor_best, anchors.anchor_worst), &o)
        }
        Command::VerifyRepresentation { rule, trials, anchors } => commands::verify(
            config,
            rule.as_deref(),
            *trials,
            (anchors.anchor_best, anchors.anchor_worst),
            &o,
        ),
        Command::EquivalenceChain => commands::equivalence_chain(config, &o),
        Command::Demo { name } => commands::demo(*name, &o),
        Command::Replay { report } => commands::replay(report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    print!("{}", outcome.text);
    if let Some(path) = &cli.common.out {
        let mut text = serde_json::to_string_pretty(&outcome.json).expect("reports serialize");
        text.push('\n');
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.code)
}
