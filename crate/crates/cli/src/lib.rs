//! Command-line front end: detection, data generation, scoring and the
//! distance-call benchmark.

mod commands;
mod record;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semdisc::search::{
    Algorithm, EpsilonPolicy, DEFAULT_EPSILON_PERCENTILE, DEFAULT_EPSILON_SAMPLES,
};
use semdisc::DiscordError;

pub use commands::{BenchRow, EvaluationRow, EvaluationSummary};
pub use record::DetectionRecord;

/// Exit code for unreadable input and invalid flags.
pub const EXIT_INPUT: i32 = 2;
/// Exit code when no target has a feasible reference.
pub const EXIT_NO_FEASIBLE: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DiscordError> for CliError {
    fn from(e: DiscordError) -> Self {
        let code = match e {
            DiscordError::NoFeasibleTarget => EXIT_NO_FEASIBLE,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "semdisc", version, about = "Semantic discord search for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find the semantic discord of a single-column CSV series.
    Detect(DetectArgs),
    /// Write labeled synthetic series (CSV values plus JSON metadata).
    Generate(GenerateArgs),
    /// Score detection records against truth intervals.
    Evaluate(EvaluateArgs),
    /// Count distance calls of the search algorithms over series sizes.
    Bench(BenchArgs),
    /// Concatenation protocol over labeled instance files: generate,
    /// detect with both detectors and score, for several seeds.
    Protocol(ProtocolArgs),
}

#[derive(Args, Debug, Clone)]
pub struct EpsilonArgs {
    /// Fixed context-similarity threshold (`inf` disables it).
    #[arg(long, conflicts_with_all = ["epsilon_percentile", "epsilon_samples"])]
    pub epsilon: Option<f64>,
    /// Percentile of sampled context-pair distances used as the threshold.
    #[arg(long, default_value_t = DEFAULT_EPSILON_PERCENTILE)]
    pub epsilon_percentile: f64,
    /// Number of context pairs sampled for the percentile.
    #[arg(long, default_value_t = DEFAULT_EPSILON_SAMPLES)]
    pub epsilon_samples: usize,
}

impl EpsilonArgs {
    pub fn policy(&self, seed: u64) -> EpsilonPolicy {
        match self.epsilon {
            Some(e) => EpsilonPolicy::Fixed(e),
            None => EpsilonPolicy::Percentile {
                percentile: self.epsilon_percentile,
                samples: self.epsilon_samples,
                seed,
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Single-column CSV, one value per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub context_len: usize,
    /// Defaults to round(0.4 * context length).
    #[arg(long)]
    pub target_len: Option<usize>,
    #[command(flatten)]
    pub epsilon: EpsilonArgs,
    /// Seed for the threshold sampling (ChaCha8).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "pruned")]
    pub algorithm: Algorithm,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Also write the record here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Leave the wall time out of the record.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Concat,
    Bump,
    Randomwalk,
}

#[derive(Args, Debug, Clone)]
pub struct PoolArgs {
    /// Instance file: one instance per line, class label first.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Separate instance file for anomalies (defaults to --pool).
    #[arg(long)]
    pub anomaly_pool: Option<PathBuf>,
    /// Class of normal instances (defaults to the first class in the file).
    #[arg(long)]
    pub normal_class: Option<String>,
    /// Class of anomalous instances (defaults to every other class).
    #[arg(long)]
    pub anomaly_class: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub normal_count: usize,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub generator: Generator,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Series k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// File stem prefix; files are <prefix>_<k>.csv and .json.
    #[arg(long, default_value = "series")]
    pub prefix: String,
    /// Random-walk length.
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub bump: BumpArgs,
}

#[derive(Args, Debug)]
pub struct BumpArgs {
    #[arg(long, default_value_t = 20)]
    pub cycles: usize,
    #[arg(long, default_value_t = 120)]
    pub cycle_len: usize,
    #[arg(long, default_value_t = 16)]
    pub bump_width: usize,
    #[arg(long, default_value_t = 2.0)]
    pub bump_height: f64,
    #[arg(long, default_value_t = 10.0)]
    pub plateau_height: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ramp_len: f64,
    #[arg(long, default_value_t = 2.0)]
    pub ramp_jitter: f64,
    #[arg(long, default_value_t = 0.02)]
    pub amplitude_jitter: f64,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Detection records (JSON); paired in order with --truth.
    #[arg(long, num_args = 1.., required = true)]
    pub detections: Vec<PathBuf>,
    /// Series metadata files (JSON) holding the truth interval.
    #[arg(long, num_args = 1.., required = true)]
    pub truth: Vec<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Series to take prefixes from; a seeded random walk otherwise.
    #[arg(long, conflicts_with = "generator")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub generator: Option<BenchGenerator>,
    #[arg(long, value_delimiter = ',', default_value = "2000,4000,8000,16000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 400)]
    pub context_len: usize,
    #[arg(long, default_value_t = 160)]
    pub target_len: usize,
    #[arg(long, value_delimiter = ',', default_value = "smart-brute,pruned")]
    pub algorithms: Vec<Algorithm>,
    #[command(flatten)]
    pub epsilon: EpsilonArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exhaustive algorithms are counted in closed form above this size.
    #[arg(long, default_value_t = 4000)]
    pub analytic_above: usize,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchGenerator {
    Randomwalk,
}

#[derive(Args, Debug)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    /// Number of series (seeds seed, seed + 1, ...).
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to the instance length.
    #[arg(long)]
    pub context_len: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parse arguments, run, print diagnostics; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => commands::detect(&a),
        Command::Generate(a) => commands::generate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Protocol(a) => commands::protocol(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("semdisc: {e}");
            e.code
        }
    }
}
