//! sparktrace command line.
//!
//! Subcommands mirror the pipeline stages: `trace` captures a micro-op
//! trace of one concrete run, `lift` translates an extracted trace into a
//! self-contained module, `replay` evaluates a module under a test case,
//! `gen` runs the concolic loop for one function, and `campaign` drives a
//! whole corpus.
//!
//! Exit codes: 0 success; 1 findings present (only with
//! `--fail-on-findings`); 2 usage error; 3 pipeline failure.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

// Keep in sync with sparktrace_core::{TRACE,MODULE}_FORMAT_VERSION;
// concat! needs literals and there is a test pinning the two together.
const VERSION_LINE: &str = concat!(env!("CARGO_PKG_VERSION"), " (TRACE v1, MODULE v1)");

#[derive(Parser)]
#[command(name = "sparktrace", version = VERSION_LINE)]
#[command(about = "Concolic testing pipeline for MiniScript libraries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration flags shared by the generating commands. Precedence:
/// built-in defaults, then `--config` file, then these flags.
#[derive(clap::Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidate input bytes (a string; each byte is a candidate).
    #[arg(long)]
    alphabet: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_solve_len: Option<usize>,
    #[arg(long)]
    max_seed_len: Option<usize>,
    #[arg(long)]
    seed_count: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    time_budget_ms: Option<u64>,
    #[arg(long)]
    trace_op_cap: Option<usize>,
    /// Report timing fields as zero (byte-identical reports across runs).
    #[arg(long)]
    zero_timings: bool,
    /// Symbolize only the first inferred String parameter.
    #[arg(long)]
    single_symbolic_arg: bool,
    /// Output directory for artifacts.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a function concretely and write raw + extracted traces.
    Trace {
        /// MiniScript source file (.mjs-mini).
        file: PathBuf,
        /// Function to run.
        function: String,
        /// Arguments: bare tokens are strings; `int:42`, `bool:true`,
        /// `null`, and `str:<percent-encoded>` select other forms.
        #[arg(long, num_args = 0.., value_name = "ARG")]
        args: Vec<String>,
        /// Comma-separated parameter indices to mark symbolic.
        #[arg(long, value_name = "I,J,..")]
        sym: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Lift an extracted trace file into a self-contained module (.sir).
    Lift {
        /// Extracted trace file.
        trace: PathBuf,
        /// Output path (defaults to the trace path with extension .sir).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a lifted module under a test case's bindings.
    Replay {
        /// Module file (.sir).
        module: PathBuf,
        /// Test case file (.tc.json).
        case: PathBuf,
    },
    /// Generate test cases for one function via the concolic loop.
    Gen {
        file: PathBuf,
        function: String,
        /// Also write per-case trace and module artifacts.
        #[arg(long)]
        keep_artifacts: bool,
        /// Exit 1 when any exception finding is present.
        #[arg(long)]
        fail_on_findings: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the full pipeline over every library in a corpus directory.
    Campaign {
        corpus: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write the coverage column as CSV.
        #[arg(long)]
        csv: bool,
        /// Exit 1 when any finding is present.
        #[arg(long)]
        fail_on_findings: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Error with a chosen process exit code.
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn pipeline(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Trace { file, function, args, sym, config } => {
            commands::trace(&file, &function, &args, sym.as_deref(), &config)
        }
        Command::Lift { trace, output } => commands::lift(&trace, output.as_deref()),
        Command::Replay { module, case } => commands::replay(&module, &case),
        Command::Gen { file, function, keep_artifacts, fail_on_findings, config } => {
            commands::generate(&file, &function, keep_artifacts, fail_on_findings, &config)
        }
        Command::Campaign { corpus, jobs, csv, fail_on_findings, config } => {
            commands::campaign(&corpus, jobs, csv, fail_on_findings, &config)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
