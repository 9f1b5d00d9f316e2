//! `rdexplain` command-line front end.

mod checks;
mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rdexplain::AdfMode;

#[derive(Parser)]
#[command(
    name = "rdexplain",
    version,
    about = "Rate-distortion relevance maps for ReLU networks"
)]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a Gaussian reference from data vectors (CSV or IDX)
    Estimate(EstimateArgs),
    /// Optimize relevance maps for one or more inputs
    Explain(ExplainArgs),
    /// Compare the analytic gradient with central finite differences
    GradCheck(GradCheckArgs),
    /// Compare the ADF distortion with a Monte-Carlo estimate
    McCheck(McCheckArgs),
    /// Exact smallest relevant set of a Boolean classifier
    Oracle(OracleArgs),
    /// Relevance-ordering rate-distortion curve
    RdCurve(RdCurveArgs),
    /// Render a relevance map as an 8-bit PGM heatmap
    Render(RenderArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Diag,
    Lowrank,
}

impl From<ModeArg> for AdfMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Diag => AdfMode::Diagonal,
            ModeArg::Lowrank => AdfMode::LowRank,
        }
    }
}

/// Network, reference and input rows shared by several subcommands.
#[derive(Args, Clone)]
pub struct Problem {
    /// Network JSON file
    #[arg(long)]
    network: PathBuf,
    /// Reference statistics JSON file
    #[arg(long)]
    stats: PathBuf,
    /// Input vectors (CSV or IDX), one per row
    #[arg(long)]
    input: PathBuf,
    /// Use only this 0-based row of the input file
    #[arg(long)]
    row: Option<usize>,
}

/// Like [`Problem`] but optional as a whole: giving any of the files
/// requires the other two.
#[derive(Args, Clone)]
pub struct OptionalProblem {
    /// Network JSON file
    #[arg(long, requires_all = ["stats", "input"])]
    network: Option<PathBuf>,
    /// Reference statistics JSON file
    #[arg(long, requires_all = ["network", "input"])]
    stats: Option<PathBuf>,
    /// Input vectors (CSV or IDX), one per row
    #[arg(long, requires_all = ["network", "stats"])]
    input: Option<PathBuf>,
    /// Use only this 0-based row of the input file
    #[arg(long, requires = "input")]
    row: Option<usize>,
}

impl OptionalProblem {
    fn get(&self) -> Option<Problem> {
        Some(Problem {
            network: self.network.clone()?,
            stats: self.stats.clone()?,
            input: self.input.clone()?,
            row: self.row,
        })
    }
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Data vectors (CSV or IDX)
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Diag)]
    mode: ModeArg,
    /// Rank of the low-rank factor
    #[arg(long, default_value_t = rdexplain::reference::DEFAULT_RANK)]
    rank: usize,
    /// Output stats file
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    problem: Problem,
    /// Penalty weight (default 0.5 for d ≤ 1024, else 0.05)
    #[arg(long)]
    lambda: Option<f64>,
    /// Covariance mode (default: the form stored in the stats file)
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Optimizer configuration JSON; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Accepted for interface uniformity; the optimizer is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON (stdout when absent)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Per-iteration trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Relevance map as `index,value` CSV (single row only)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradCheckArgs {
    /// Check a given problem instead of random instances
    #[command(flatten)]
    problem: OptionalProblem,
    /// Scores to check at (`index,value` CSV or explain JSON); random
    /// interior scores when absent
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Number of random instances
    #[arg(long, default_value_t = 10)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mode to check (both when absent)
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Coordinates checked per instance and mode
    #[arg(long, default_value_t = 20)]
    coords: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
pub struct McCheckArgs {
    #[command(flatten)]
    problem: OptionalProblem,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo samples per instance
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Diag)]
    mode: ModeArg,
    /// Fail when the median relative error exceeds this value
    #[arg(long)]
    max_median: Option<f64>,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Truth table file: `d` on the first line, `2^d` bits on the second
    #[arg(long, conflicts_with = "network", required_unless_present = "network")]
    table: Option<PathBuf>,
    /// Network thresholded at 0.5 on binary inputs
    #[arg(long)]
    network: Option<PathBuf>,
    /// Binary input, component 0 first (e.g. `110` or `1,1,0`)
    #[arg(long)]
    x: String,
    /// Required agreement probability (`3/4`, `0.75`, `1`)
    #[arg(long)]
    delta: String,
    /// Distortion levels for the exact rate-distortion function
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<String>,
    #[arg(long, default_value_t = rdexplain::discrete::DEFAULT_MAX_DIM)]
    max_dim: usize,
}

#[derive(Args)]
pub struct RdCurveArgs {
    #[command(flatten)]
    problem: Problem,
    /// Relevance maps (explain JSON or `index,value` CSV); a random
    /// ordering is evaluated when absent
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Points on the uniform rate grid
    #[arg(long, default_value_t = rdexplain::ordering::DEFAULT_RATE_POINTS)]
    rates: usize,
    /// Reference samples per rate (default 512 for d ≤ 1024, else 64)
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clamp reference samples to [0, 1]
    #[arg(long)]
    clamp: bool,
    /// Curve CSV
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Relevance map (explain JSON or `index,value` CSV)
    #[arg(long)]
    map: PathBuf,
    /// Which map of an explain file
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(short, long)]
    out: PathBuf,
}

/// A failed run: exit code 1 for failed checks and invalid values, 2 for
/// unreadable or malformed input.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<rdexplain::Error> for Failure {
    fn from(e: rdexplain::Error) -> Self {
        use rdexplain::Error as E;
        let code = match e {
            E::Parse { .. } | E::Io(_) | E::Json(_) | E::Format(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// JSON printed on stdout. A verdict with `pass == false` exits with 1.
pub struct Verdict {
    pub json: serde_json::Value,
    pub pass: bool,
}

impl Verdict {
    pub fn ok(json: serde_json::Value) -> Self {
        Self { json, pass: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Explain(a) => commands::explain(a),
        Command::GradCheck(a) => checks::grad_check(a),
        Command::McCheck(a) => checks::mc_check(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::RdCurve(a) => commands::rd_curve(a),
        Command::Render(a) => commands::render(a),
    });
    match result {
        Ok(verdict) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&verdict.json).expect("serializable verdict")
            );
            if verdict.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
