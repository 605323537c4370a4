//! `lurex`: validate, analyze and simulate saturated Lur'e loops from a JSON spec.
//!
//! Exit codes: 0 success, 1 unreadable input, 2 invalid system or failed
//! assertion, 3 exact mode unsupported for the given system.

mod commands;
mod spec;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lurex::exact::ExactError;
use thiserror::Error;

use crate::spec::Arithmetic;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Unsupported(_) => 3,
        }
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::ExactModeUnsupported(_) => CliError::Unsupported(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lurex", version, about = "Saturated Lur'e loop analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// System spec (JSON), or `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Directory for report.json and CSV files.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the spec's arithmetic mode.
    #[arg(long, value_enum)]
    pub mode: Option<Arithmetic>,
    /// Overrides the spec's horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing hypotheses on G = N/D.
    Validate(Common),
    /// Crossing sets, gain interval and an optional spectral-radius sweep.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Sweep as LO:HI:STEPS.
        #[arg(long)]
        alpha_range: Option<String>,
    },
    /// Simulate the saturated loop and classify the response.
    Simulate(Common),
    /// Classify runs from random initial states.
    Census {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Initial states are drawn from [-W, W]^n.
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
    },
    /// Growth and limit oracles on the linear closed loop.
    Oracle(Common),
    /// Run a built-in example against its expected values.
    Reproduce {
        #[arg(value_parser = ["ex1", "ex2", "ex3-exact", "ex3-perturbed"])]
        example: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A command's JSON report, extra files and exit code.
pub struct Outcome {
    pub report: serde_json::Value,
    pub files: Vec<(&'static str, String)>,
    pub exit: u8,
}

fn write_outputs(dir: &PathBuf, outcome: &Outcome, report: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(dir.join("report.json"), report).map_err(|e| CliError::Io(e.to_string()))?;
    for (name, content) in &outcome.files {
        fs::write(dir.join(name), content).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    Ok(match cli.command {
        Command::Validate(c) => (commands::validate(&c)?, c.output),
        Command::Analyze { common, alpha_range } => {
            (commands::analyze(&common, alpha_range.as_deref())?, common.output)
        }
        Command::Simulate(c) => (commands::simulate(&c)?, c.output),
        Command::Census {
            common,
            seed,
            trials,
            half_width,
        } => (commands::census(&common, seed, trials, half_width)?, common.output),
        Command::Oracle(c) => (commands::oracle(&c)?, c.output),
        Command::Reproduce { example, output } => (commands::reproduce(&example)?, output),
    })
}

fn main() -> ExitCode {
    // usage errors are parse errors (exit 1); clap's own code 2 would read as an invalid system
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok((outcome, dir)) => {
            let report = serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n";
            print!("{report}");
            if let Some(dir) = dir {
                if let Err(e) = write_outputs(&dir, &outcome, &report) {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code());
                }
            }
            ExitCode::from(outcome.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
