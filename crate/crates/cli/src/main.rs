//! `ced`: generate, label, detect and score complex events from the shell.
//!
//! Exit codes: 0 success, 1 usage, 2 rule diagnostics or failed checks,
//! 3 file or format problems.

mod commands;
mod span;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "ced",
    version,
    about = "Complex event detection over windowed activity traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RulesArg {
    /// Rule file, or `builtin` for the three built-in hygiene rules.
    #[arg(long, value_name = "FILE")]
    rules: String,
}

#[derive(Debug, Args)]
struct WorkersArg {
    /// Worker threads for batch work (default: all cores). Output does not
    /// depend on this.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a rule file and print its diagnostics.
    Validate {
        #[command(flatten)]
        rules: RulesArg,
        /// Window length the rules are compiled for.
        #[arg(long, default_value_t = 5, value_name = "SECONDS")]
        window_s: u32,
        /// Also print the rules in canonical form (constants in windows).
        #[arg(long)]
        print: bool,
    },
    /// Simulate a labeled dataset.
    Gen {
        /// Simulator settings (TOML). Defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
        /// Number of traces.
        #[arg(long)]
        n: usize,
        /// Trace length: `3m`, `5m`, `15m`, `30m`, any `<N>m`/`<N>s`, or `<N>w` windows.
        #[arg(long)]
        span: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Add recognizer noise with this accuracy; fills `soft` and replaces
        /// `activities` with the noisy hard labels (labels stay ground truth).
        #[arg(long, value_name = "P")]
        noise: Option<f64>,
        /// Rescale routine rates so the expected routine count per trace
        /// stays what the config gives at its own span.
        #[arg(long)]
        stretch: bool,
        #[command(flatten)]
        workers: WorkersArg,
    },
    /// Attach ground-truth labels computed from each trace's activities.
    Label {
        #[command(flatten)]
        rules: RulesArg,
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        workers: WorkersArg,
    },
    /// Run the rules over a dataset and write predictions.
    Detect {
        #[command(flatten)]
        rules: RulesArg,
        /// `crisp`, `argmax` or `belief:<threshold>` (`belief` means 0.5).
        #[arg(long)]
        mode: String,
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Record per-window processing time in the predictions.
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        workers: WorkersArg,
    },
    /// Score predictions against labeled traces.
    Eval {
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Average conditional F1 per sample instead of pooling windows.
        #[arg(long)]
        per_sample: bool,
    },
    /// Measure per-window latency on simulated noisy traces.
    Bench {
        #[command(flatten)]
        rules: RulesArg,
        #[arg(long, default_value = "30m")]
        span: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail (exit 2) if crisp p99 exceeds this many microseconds.
        #[arg(long, default_value_t = 100.0, value_name = "US")]
        crisp_p99_us: f64,
        /// Fail (exit 2) if belief p99 exceeds this many microseconds.
        #[arg(long, default_value_t = 10_000.0, value_name = "US")]
        belief_p99_us: f64,
        /// Also write the JSON report here.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.to_string().is_empty() {
                eprintln!("ced: {f}");
            }
            ExitCode::from(f.code())
        }
    }
}
