use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use twoscale_core::scenario::{self, RunConfig, RunOutcome, Scenario};
use twoscale_core::{Error, ErrorCategory};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ADAPT_INCOMPLETE: u8 = 4;
const EXIT_ORACLE_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "twoscale",
    version,
    about = "Two-scale finite element solver for coupled elliptic-parabolic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomized checks (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Time integration of the coupled system.
    Simulate,
    /// Convergence-rate study on a manufactured problem.
    Converge,
    /// Adaptive macro refinement driven by the residual estimator.
    Adapt,
    /// Estimator effectivity over uniform levels.
    Effectivity,
    /// Kronecker, conservation, steady-state, exponential and structural self-checks.
    OracleCheck,
}

impl Command {
    fn scenario(self) -> Scenario {
        match self {
            Command::Simulate => Scenario::Simulate,
            Command::Converge => Scenario::Converge,
            Command::Adapt => Scenario::Adapt,
            Command::Effectivity => Scenario::Effectivity,
            Command::OracleCheck => Scenario::OracleCheck,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Config => EXIT_CONFIG,
        ErrorCategory::Solver => EXIT_SOLVER,
        ErrorCategory::AdaptIncomplete => EXIT_ADAPT_INCOMPLETE,
        ErrorCategory::Io => EXIT_OTHER,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.scenario = cli.command.scenario();
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Prints the error record on stderr and, when possible, writes it next to the outputs.
fn report_error(err: &Error, code: u8, out_dir: Option<&Path>) {
    let record = json!({
        "error": {
            "category": err.category().as_str(),
            "message": err.to_string(),
            "exit_code": code,
        }
    });
    eprintln!("{record}");
    if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
    }
}

fn print_outcome(outcome: &RunOutcome) {
    for line in &outcome.summary {
        println!("{line}");
    }
    for path in &outcome.outputs {
        println!("wrote {}", path.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            let code = exit_code(&e);
            report_error(&e, code, cli.out.as_deref());
            return ExitCode::from(code);
        }
    };
    match scenario::run(&config) {
        Ok(outcome) => {
            print_outcome(&outcome);
            if let Some(summary) = outcome.adapt_incomplete.clone() {
                report_error(&summary.into_error(), EXIT_ADAPT_INCOMPLETE, Some(&config.output_dir));
                return ExitCode::from(EXIT_ADAPT_INCOMPLETE);
            }
            if outcome.failed_checks > 0 {
                eprintln!(
                    "{}",
                    json!({"error": {"category": "oracle", "failed_checks": outcome.failed_checks, "exit_code": EXIT_ORACLE_FAILED}})
                );
                return ExitCode::from(EXIT_ORACLE_FAILED);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            report_error(&e, code, Some(&config.output_dir));
            ExitCode::from(code)
        }
    }
}
