//! `studperm`: permutation tests for autocorrelation from the command line.
//!
//! Exit status is 0 on success, 2 on usage errors (reported by the argument
//! parser) and 1 on data or domain errors, which print a single `error:` line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use studperm::harness::{Scale, Sidedness, TestKind};
use studperm::multiple::Correction;
use studperm::studentizer::BandwidthRule;

#[derive(Parser, Debug)]
#[command(name = "studperm", version, about = "Studentized permutation tests for serial correlation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed for all randomness. When omitted, one is drawn from the OS
    /// and printed to stderr.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Significance level.
    #[arg(long, global = true, value_parser = level)]
    pub alpha: Option<f64>,

    /// Number of random permutations B.
    #[arg(long, short = 'B', global = true, value_parser = positive)]
    pub permutations: Option<usize>,

    /// Studentizer truncation: `cube-root` or a fixed positive integer.
    #[arg(long, global = true)]
    pub bn_rule: Option<BandwidthRule>,

    /// Floor for the studentizing variance.
    #[arg(long, global = true, value_parser = positive_real)]
    pub epsilon: Option<f64>,

    /// `greater` or `two-sided`.
    #[arg(long, global = true)]
    pub sided: Option<Sidedness>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = positive)]
    pub jobs: Option<usize>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Test H0: rho(k) = 0 for one series at one lag.
    Test(TestArgs),
    /// Studentized tests at lags 1..r with a multiplicity correction.
    Portmanteau(PortmanteauArgs),
    /// Simulate a process realization.
    Simulate(SimulateArgs),
    /// Monte Carlo null rejection table.
    McTable(McTableArgs),
    /// Local power of the studentized test against AR(1) alternatives.
    PowerCurve(PowerCurveArgs),
    /// Portmanteau analysis of log returns from a price file.
    Returns(ReturnsArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Studentized,
    Unstudentized,
    Autocovariance,
    LjungBox,
    BoxPierce,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// CSV with one numeric column, or a header row plus `--column`.
    #[arg(long, value_parser = existing_file)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub lag: usize,
    #[arg(long, value_enum, default_value_t = Method::Studentized)]
    pub method: Method,
    /// Use all n! orderings instead of random permutations (small n only).
    #[arg(long, conflicts_with = "permutations")]
    pub enumerate: bool,
    /// Shortest series accepted by the studentized methods.
    #[arg(long)]
    pub min_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PortmanteauArgs {
    #[arg(long, value_parser = existing_file)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub lags: usize,
    #[arg(long, default_value = "bonferroni")]
    pub correction: Correction,
    /// Row label for CSV output; defaults to the file stem.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// TOML process description (`kind = "ar2"`, ...).
    #[arg(long, value_parser = existing_file, conflicts_with = "kind")]
    pub config: Option<PathBuf>,
    /// iid, m-dependent-product, ar1-local, ar2, ar2-product or arma.
    #[arg(long, required_unless_present = "config")]
    pub kind: Option<String>,
    #[arg(long, requires = "kind")]
    pub m: Option<usize>,
    #[arg(long, requires = "kind")]
    pub power: Option<u32>,
    #[arg(long, requires = "kind")]
    pub h: Option<f64>,
    #[arg(long, requires = "kind")]
    pub phi: Option<f64>,
    #[arg(long, requires = "kind")]
    pub rho: Option<f64>,
    #[arg(long, requires = "kind", value_delimiter = ',', allow_hyphen_values = true)]
    pub ar: Option<Vec<f64>>,
    #[arg(long, requires = "kind", value_delimiter = ',', allow_hyphen_values = true)]
    pub ma: Option<Vec<f64>>,
    /// gaussian, uniform or student-t.
    #[arg(long, requires = "kind")]
    pub innovation: Option<String>,
    #[arg(long, requires = "kind")]
    pub df: Option<f64>,
    #[arg(long, requires = "kind")]
    pub burn_in: Option<usize>,
    #[arg(long, short, value_parser = positive)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct McTableArgs {
    #[arg(long, value_parser = ["table1", "table2", "table5"], required_unless_present = "config")]
    pub preset: Option<String>,
    /// TOML process description for a single custom experiment.
    #[arg(long, value_parser = existing_file, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Tests for a custom experiment (default: all).
    #[arg(long, value_delimiter = ',', requires = "config")]
    pub tests: Option<Vec<TestKind>>,
    /// `desk` (R=2000, B=500) or `full` (R=10000, B=2000).
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, short = 'R', value_parser = positive)]
    pub replications: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub lag: usize,
    /// Directory for per-cell statistic densities and p-value QQ data.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PowerCurveArgs {
    #[arg(long, value_parser = ["figure4"], conflicts_with_all = ["h", "n"])]
    pub preset: Option<String>,
    #[arg(long, value_delimiter = ',', required_unless_present = "preset")]
    pub h: Option<Vec<f64>>,
    #[arg(long, short, value_delimiter = ',', value_parser = positive, required_unless_present = "preset")]
    pub n: Option<Vec<usize>>,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, short = 'R', value_parser = positive)]
    pub replications: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReturnsArgs {
    /// Price CSV with a header row.
    #[arg(long, value_parser = existing_file)]
    pub input: PathBuf,
    #[arg(long, default_value = "Date")]
    pub date_column: String,
    #[arg(long, default_value = "Close")]
    pub price_column: String,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub lags: usize,
    #[arg(long, default_value = "bonferroni")]
    pub correction: Correction,
    #[arg(long)]
    pub label: Option<String>,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn positive_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn level(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a level in (0, 1), got `{s}`")),
    }
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
