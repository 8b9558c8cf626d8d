//! `zsl`: reproducible command-line runs over the zsl-core pipeline.
//!
//! Exit status: 0 success, 1 failed check (gradcheck, verify-prop1),
//! 2 usage error, 3 data or validation error, 4 training divergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zsl_core::eval::Method;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "zsl", version, about = "Zero-shot learning with adaptive structural embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Seed and configuration overrides shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Overrides {
    /// Seed for data generation and the first training trial.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Configuration override, repeatable (for example `train.c=0.1`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train one model on the seen split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Predict unseen labels with a trained model.
    Predict {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model, or train and score a method over several trials.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with_all = ["method", "trials"], required_unless_present = "method")]
        model: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare training with and without class-mean condensation.
    BenchFt {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to lr, eszsl and aste.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Accuracy against the fraction of seen training data.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check analytic gradients against finite differences on random instances.
    Gradcheck {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the class-mean covariance property and the condensed risk bound.
    VerifyProp1 {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

pub enum CliError {
    Usage(String),
    Core(zsl_core::Error),
    /// A verification command ran but its check failed.
    Check(String),
}

impl From<zsl_core::Error> for CliError {
    fn from(e: zsl_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn resolve(overrides: &Overrides, trials: Option<usize>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    cfg.set_seed(overrides.seed);
    for s in &overrides.set {
        cfg.set(s).map_err(CliError::Usage)?;
    }
    if let Some(t) = trials {
        cfg.train.trials = t;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), CliError> {
    use commands::*;
    match command {
        Command::Synth { out, overrides } => synth(&out, &resolve(&overrides, None)?),
        Command::Train { manifest, method, out, overrides } => {
            train(&manifest, method, &out, &resolve(&overrides, None)?)
        }
        Command::Predict { manifest, model, out } => predict(&manifest, &model, &out),
        Command::Eval { manifest, out, model, method, trials, overrides } => {
            let cfg = resolve(&overrides, trials)?;
            match (model, method) {
                (Some(model), _) => eval_model(&manifest, &model, &out),
                (None, Some(method)) => eval_method(&manifest, method, &out, &cfg),
                (None, None) => unreachable!("clap requires --model or --method"),
            }
        }
        Command::BenchFt { manifest, out, method, trials, overrides } => {
            bench_ft(&manifest, method, &out, &resolve(&overrides, trials)?)
        }
        Command::Sweep { manifest, method, out, trials, overrides } => {
            sweep(&manifest, method, &out, &resolve(&overrides, trials)?)
        }
        Command::Gradcheck { out, overrides } => gradcheck(out.as_deref(), &resolve(&overrides, None)?),
        Command::VerifyProp1 { manifest, out, overrides } => {
            verify_prop1(&manifest, out.as_deref(), &resolve(&overrides, None)?)
        }
    }
}

fn one_line(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head: String = msg.split("\n\n").next().unwrap_or("invalid arguments").to_string();
            eprintln!("zsl: {}", one_line(head.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("zsl: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("zsl: check failed: {}", one_line(&msg));
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("zsl: {}", one_line(&e.to_string()));
            ExitCode::from(if e.is_divergence() { 4 } else { 3 })
        }
    }
}
