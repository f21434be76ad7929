//! Monte Carlo driver for null rejection grids, local power curves and
//! plot-ready density and QQ data.
//!
//! Replication `r` at sample size `n` simulates from stream `(seed, n, r)`
//! and each test draws its permutations from `(seed, n, r, test)`, so every
//! table is a deterministic function of its [`ExperimentSpec`] no matter how
//! many worker threads run it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::classic;
use crate::error::{Error, Result};
use crate::perm::{
    self, check_alpha, Autocorrelation, PermutationScheme, Statistic, StudentizedAutocorrelation,
    StudentizedAutocovariance,
};
use crate::process::{InnovationLaw, ProcessSpec, DEFAULT_BURN_IN};
use crate::rng;
use crate::studentizer::{self, StudentizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    StudentizedPerm,
    UnstudentizedPerm,
    LjungBox,
    BoxPierce,
    CovPerm,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::StudentizedPerm,
        TestKind::UnstudentizedPerm,
        TestKind::LjungBox,
        TestKind::BoxPierce,
        TestKind::CovPerm,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            TestKind::StudentizedPerm => "Stud. Perm.",
            TestKind::UnstudentizedPerm => "Unst. Perm.",
            TestKind::LjungBox => "Ljung-Box",
            TestKind::BoxPierce => "Box-Pierce",
            TestKind::CovPerm => "Cov. Perm.",
        }
    }

    fn stream_tag(&self) -> u64 {
        match self {
            TestKind::StudentizedPerm => 1,
            TestKind::UnstudentizedPerm => 2,
            TestKind::LjungBox => 3,
            TestKind::BoxPierce => 4,
            TestKind::CovPerm => 5,
        }
    }

    fn min_len(&self, cfg: &StudentizerConfig) -> usize {
        match self {
            TestKind::StudentizedPerm | TestKind::CovPerm => cfg.min_len.max(cfg.lag + 3),
            _ => cfg.lag + 2,
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "studentized-perm" | "studentized" => Ok(TestKind::StudentizedPerm),
            "unstudentized-perm" | "unstudentized" => Ok(TestKind::UnstudentizedPerm),
            "ljung-box" => Ok(TestKind::LjungBox),
            "box-pierce" => Ok(TestKind::BoxPierce),
            "cov-perm" | "covariance" => Ok(TestKind::CovPerm),
            other => Err(Error::domain(format!("unknown test `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    OneSidedGreater,
    TwoSided,
}

impl std::str::FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sided-greater" | "greater" | "one-sided" => Ok(Sidedness::OneSidedGreater),
            "two-sided" | "two" => Ok(Sidedness::TwoSided),
            other => Err(Error::domain(format!("unknown sidedness `{other}`"))),
        }
    }
}

impl Sidedness {
    pub fn pick(&self, p: &perm::PValues) -> f64 {
        match self {
            Sidedness::OneSidedGreater => p.greater,
            Sidedness::TwoSided => p.two_sided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Row label; defaults to the process label.
    pub label: String,
    pub process: ProcessSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub tests: Vec<TestKind>,
    pub seed: u64,
    pub sidedness: Sidedness,
    /// Lag and studentization settings; the chi-square tests use `lag` as
    /// their number of joint lags.
    pub studentizer: StudentizerConfig,
}

impl ExperimentSpec {
    pub fn new(process: ProcessSpec, sample_sizes: Vec<usize>, tests: Vec<TestKind>) -> Self {
        Self {
            label: process.label(),
            process,
            sample_sizes,
            replications: 2000,
            permutations: 500,
            alpha: 0.05,
            tests,
            seed: 0,
            sidedness: Sidedness::OneSidedGreater,
            studentizer: StudentizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::domain("replications must be at least 1"));
        }
        if self.permutations == 0 {
            return Err(Error::domain("permutations must be at least 1"));
        }
        if self.tests.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::domain("experiment needs at least one test and one sample size"));
        }
        check_alpha(self.alpha)?;
        self.studentizer.validate()?;
        self.process.validate()?;
        for &n in &self.sample_sizes {
            for t in &self.tests {
                let min = t.min_len(&self.studentizer);
                if n < min {
                    return Err(Error::domain(format!(
                        "sample size {n} is below the minimum {min} for {}",
                        t.display_name()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub rejections: usize,
    pub replications: usize,
    pub frequency: f64,
    pub std_error: f64,
    /// Replications whose series had zero variance; counted as non-rejections.
    pub degenerate: usize,
    /// Replications whose observed studentizing variance hit the floor.
    pub floored: usize,
    /// Per-replication p-values in replication order (degenerate ones omitted).
    #[serde(skip)]
    pub p_values: Vec<f64>,
    /// Per-replication observed statistics (degenerate ones omitted).
    #[serde(skip)]
    pub statistics: Vec<f64>,
    /// Permutation reference values from the first non-degenerate replication.
    #[serde(skip)]
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub process: String,
    pub test: TestKind,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub alpha: f64,
    pub replications: usize,
    pub permutations: usize,
    pub sidedness: Sidedness,
    pub sample_sizes: Vec<usize>,
    pub rows: Vec<Row>,
}

impl RejectionTable {
    pub fn cell(&self, process: &str, test: TestKind, n: usize) -> Option<&Cell> {
        self.rows
            .iter()
            .find(|r| r.process == process && r.test == test)?
            .cells
            .iter()
            .find(|c| c.n == n)
    }

    /// Appends the rows of `other`; both tables must share their settings.
    pub fn extend(&mut self, other: RejectionTable) -> Result<()> {
        if self.sample_sizes != other.sample_sizes
            || self.alpha != other.alpha
            || self.replications != other.replications
            || self.permutations != other.permutations
        {
            return Err(Error::domain("cannot merge tables with different settings"));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// One row per (process, test), one column per sample size.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("process,test");
        for n in &self.sample_sizes {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", csv_field(&row.process), row.test.display_name());
            for c in &row.cells {
                let _ = write!(out, ",{:.4}", c.frequency);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Outcome {
    p_value: Option<f64>,
    statistic: f64,
    floored: bool,
    reference: Option<Vec<f64>>,
}

impl Outcome {
    fn degenerate() -> Self {
        Outcome {
            p_value: None,
            statistic: f64::NAN,
            floored: false,
            reference: None,
        }
    }
}

fn run_permutation<S: Statistic>(
    x: &[f64],
    statistic: &S,
    spec: &ExperimentSpec,
    seed: u64,
    floored: bool,
    keep_reference: bool,
) -> Result<Outcome> {
    let scheme = PermutationScheme::monte_carlo(spec.permutations, seed);
    let dist = match perm::permutation_distribution(x, statistic, &scheme) {
        Err(Error::DegenerateSeries) => return Ok(Outcome::degenerate()),
        other => other?,
    };
    let p = dist.p_values(dist.observed());
    Ok(Outcome {
        p_value: Some(spec.sidedness.pick(&p)),
        statistic: dist.observed(),
        floored,
        reference: keep_reference.then(|| dist.values().to_vec()),
    })
}

fn evaluate_test(
    test: TestKind,
    x: &[f64],
    spec: &ExperimentSpec,
    n: usize,
    rep: usize,
) -> Result<Outcome> {
    let cfg = &spec.studentizer;
    let seed = rng::derive_seed(spec.seed, &[n as u64, rep as u64, test.stream_tag()]);
    let keep = rep == 0;
    let classic_outcome = |r: Result<classic::PortmanteauStatistic>| match r {
        Err(Error::DegenerateSeries) => Ok(Outcome::degenerate()),
        Err(e) => Err(e),
        Ok(s) => Ok(Outcome {
            p_value: Some(s.p_value),
            statistic: s.q,
            floored: false,
            reference: None,
        }),
    };
    match test {
        TestKind::StudentizedPerm => match studentizer::studentized_rho(x, cfg) {
            Err(Error::DegenerateSeries) => Ok(Outcome::degenerate()),
            Err(e) => Err(e),
            Ok(s) => run_permutation(x, &StudentizedAutocorrelation(*cfg), spec, seed, s.floored, keep),
        },
        TestKind::CovPerm => match studentizer::studentized_cov(x, cfg) {
            Err(Error::DegenerateSeries) => Ok(Outcome::degenerate()),
            Err(e) => Err(e),
            Ok(s) => run_permutation(x, &StudentizedAutocovariance(*cfg), spec, seed, s.floored, keep),
        },
        TestKind::UnstudentizedPerm => {
            run_permutation(x, &Autocorrelation { lag: cfg.lag }, spec, seed, false, keep)
        }
        TestKind::LjungBox => classic_outcome(classic::ljung_box(x, cfg.lag)),
        TestKind::BoxPierce => classic_outcome(classic::box_pierce(x, cfg.lag)),
    }
}

fn aggregate(n: usize, alpha: f64, outcomes: Vec<Outcome>) -> Cell {
    let replications = outcomes.len();
    let mut cell = Cell {
        n,
        rejections: 0,
        replications,
        frequency: 0.0,
        std_error: 0.0,
        degenerate: 0,
        floored: 0,
        p_values: Vec::new(),
        statistics: Vec::new(),
        reference: Vec::new(),
    };
    for o in outcomes {
        match o.p_value {
            None => cell.degenerate += 1,
            Some(p) => {
                if p <= alpha {
                    cell.rejections += 1;
                }
                cell.p_values.push(p);
                cell.statistics.push(o.statistic);
            }
        }
        if o.floored {
            cell.floored += 1;
        }
        if cell.reference.is_empty() {
            if let Some(r) = o.reference {
                cell.reference = r;
            }
        }
    }
    let f = cell.rejections as f64 / replications as f64;
    cell.frequency = f;
    cell.std_error = (f * (1.0 - f) / replications as f64).sqrt();
    cell
}

/// Null (or alternative) rejection frequencies for every (test, n) pair.
pub fn rejection_grid(spec: &ExperimentSpec) -> Result<RejectionTable> {
    spec.validate()?;
    let mut per_test: Vec<Vec<Cell>> = vec![Vec::new(); spec.tests.len()];
    for &n in &spec.sample_sizes {
        let results: Vec<Vec<Outcome>> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                let mut stream = rng::stream(spec.seed, &[n as u64, rep as u64, 0]);
                let series = spec.process.generate(n, &mut stream)?;
                spec.tests
                    .iter()
                    .map(|&t| evaluate_test(t, series.values(), spec, n, rep))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut columns: Vec<Vec<Outcome>> = (0..spec.tests.len())
            .map(|_| Vec::with_capacity(spec.replications))
            .collect();
        for rep in results {
            for (col, o) in columns.iter_mut().zip(rep) {
                col.push(o);
            }
        }
        for (cells, col) in per_test.iter_mut().zip(columns) {
            cells.push(aggregate(n, spec.alpha, col));
        }
    }
    Ok(RejectionTable {
        alpha: spec.alpha,
        replications: spec.replications,
        permutations: spec.permutations,
        sidedness: spec.sidedness,
        sample_sizes: spec.sample_sizes.clone(),
        rows: spec
            .tests
            .iter()
            .zip(per_test)
            .map(|(&test, cells)| Row {
                process: spec.label.clone(),
                test,
                cells,
            })
            .collect(),
    })
}

pub fn standard_normal_cdf(t: f64) -> f64 {
    Normal::standard().cdf(t)
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Limiting local power `1 - Phi(z_{1-alpha} - h)` of the one-sided test.
pub fn asymptotic_local_power(h: f64, alpha: f64) -> f64 {
    1.0 - standard_normal_cdf(standard_normal_quantile(1.0 - alpha) - h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub h: f64,
    pub n: usize,
    pub frequency: f64,
    pub std_error: f64,
    pub asymptotic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSettings {
    pub replications: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub studentizer: StudentizerConfig,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            replications: 2000,
            permutations: 500,
            alpha: 0.05,
            seed: 0,
            studentizer: StudentizerConfig::default(),
        }
    }
}

/// One-sided studentized permutation power against AR(1) alternatives with
/// coefficient `h / sqrt(n)`. All `h` share the same random streams.
pub fn local_power_curve(h_values: &[f64], n: usize, settings: &PowerSettings) -> Result<Vec<PowerPoint>> {
    if let Some(h) = h_values.iter().find(|&&h| !(h >= 0.0 && h < (n as f64).sqrt())) {
        return Err(Error::domain(format!("h = {h} outside [0, sqrt(n))")));
    }
    h_values
        .iter()
        .map(|&h| {
            let spec = ExperimentSpec {
                replications: settings.replications,
                permutations: settings.permutations,
                alpha: settings.alpha,
                seed: settings.seed,
                studentizer: settings.studentizer,
                ..ExperimentSpec::new(
                    ProcessSpec::Ar1Local { h },
                    vec![n],
                    vec![TestKind::StudentizedPerm],
                )
            };
            let table = rejection_grid(&spec)?;
            let cell = &table.rows[0].cells[0];
            Ok(PowerPoint {
                h,
                n,
                frequency: cell.frequency,
                std_error: cell.std_error,
                asymptotic: asymptotic_local_power(h, settings.alpha),
            })
        })
        .collect()
}

pub fn power_curve_csv(points: &[PowerPoint]) -> String {
    let mut out = String::from("h,n,frequency,std_error,asymptotic\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4}",
            p.h, p.n, p.frequency, p.std_error, p.asymptotic
        );
    }
    out
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rule-of-thumb bandwidth `0.9 * min(sd, IQR / 1.34) * N^(-1/5)`, falling
/// back to `sd` when the IQR vanishes.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::domain("density estimation needs at least 2 samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("density samples must be finite"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread.is_nan() || spread <= 0.0 {
        spread = sd;
    }
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::domain("all samples are equal; bandwidth would be zero"));
    }
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Gaussian kernel density estimate with explicit bandwidth.
pub fn kde_with_bandwidth(samples: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() || bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(Error::domain("density estimation needs samples and a positive bandwidth"));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&t| {
            let s: f64 = samples
                .iter()
                .map(|&x| {
                    let u = (t - x) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum();
            (t, s * norm)
        })
        .collect())
}

pub fn kde_curve(samples: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let bw = silverman_bandwidth(samples)?;
    kde_with_bandwidth(samples, grid, bw)
}

/// `points` evenly spaced values covering the data plus three bandwidths on each side.
pub fn density_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    let bw = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let points = points.max(2);
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

/// Pairs `((i - 0.5) / N, p_(i))` for a uniform QQ plot.
pub fn qq_pvalues(p_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if p_values.is_empty() {
        return Err(Error::domain("QQ data needs at least one p-value"));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, p)| ((i as f64 + 0.5) / n, p))
        .collect())
}

/// Kolmogorov distance between the empirical CDF of `values` and `cdf`.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let f = cdf(v);
        worst = worst.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    worst
}

pub fn ks_distance_to_normal(values: &[f64]) -> f64 {
    ks_distance(values, standard_normal_cdf)
}

pub fn pairs_csv(header: (&str, &str), pairs: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in pairs {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// 2000 replications, 500 permutations.
    Desk,
    /// 10000 replications, 2000 permutations.
    Full,
}

impl Scale {
    pub fn replications(&self) -> usize {
        match self {
            Scale::Desk => 2000,
            Scale::Full => 10_000,
        }
    }

    pub fn permutations(&self) -> usize {
        match self {
            Scale::Desk => 500,
            Scale::Full => 2000,
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::domain(format!("unknown scale `{other}`"))),
        }
    }
}

pub const TABLE_SAMPLE_SIZES: [usize; 7] = [10, 20, 50, 80, 100, 500, 1000];
pub const FIGURE4_SAMPLE_SIZES: [usize; 3] = [100, 500, 1000];

pub fn figure4_h_values() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.25).collect()
}

/// Studentizer settings for the table presets, whose grids start at n = 10.
pub fn preset_studentizer() -> StudentizerConfig {
    StudentizerConfig {
        min_len: TABLE_SAMPLE_SIZES[0],
        ..StudentizerConfig::default()
    }
}

fn m_dependent_processes() -> Vec<ProcessSpec> {
    (0..=3)
        .map(|m| ProcessSpec::MDependentProduct { m, power: 1 })
        .collect()
}

fn mixing_processes() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::ar2(0.0, 0.5, InnovationLaw::Gaussian),
        ProcessSpec::Ar2Product {
            rho: 0.5,
            burn_in: DEFAULT_BURN_IN,
        },
        ProcessSpec::ar2(0.0, 0.5, InnovationLaw::Uniform),
        ProcessSpec::ar2(0.0, 0.5, InnovationLaw::StudentT { df: 9.5 }),
    ]
}

const CLASSIC_GRID: [TestKind; 4] = [
    TestKind::StudentizedPerm,
    TestKind::UnstudentizedPerm,
    TestKind::LjungBox,
    TestKind::BoxPierce,
];

/// Experiments making up a named table preset (`table1`, `table2`, `table5`).
pub fn table_preset(name: &str, scale: Scale, seed: u64) -> Result<Vec<ExperimentSpec>> {
    let (processes, tests): (Vec<ProcessSpec>, Vec<TestKind>) = match name {
        "table1" => (m_dependent_processes(), CLASSIC_GRID.to_vec()),
        "table2" => (mixing_processes(), CLASSIC_GRID.to_vec()),
        "table5" => {
            let mut all = m_dependent_processes();
            all.extend(mixing_processes());
            (all, vec![TestKind::CovPerm])
        }
        other => return Err(Error::domain(format!("unknown table preset `{other}`"))),
    };
    Ok(processes
        .into_iter()
        .map(|process| ExperimentSpec {
            replications: scale.replications(),
            permutations: scale.permutations(),
            seed,
            studentizer: preset_studentizer(),
            ..ExperimentSpec::new(process, TABLE_SAMPLE_SIZES.to_vec(), tests.clone())
        })
        .collect())
}

/// Runs every experiment of a preset and stacks the rows.
pub fn run_experiments(specs: &[ExperimentSpec]) -> Result<RejectionTable> {
    let mut iter = specs.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::domain("no experiments to run"))?;
    let mut table = rejection_grid(first)?;
    for spec in iter {
        table.extend(rejection_grid(spec)?)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn qq_examples() {
        assert_eq!(qq_pvalues(&[0.5]).unwrap(), vec![(0.5, 0.5)]);
        let grid: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).rev().collect();
        for (u, p) in qq_pvalues(&grid).unwrap() {
            assert_relative_eq!(u, p, epsilon = 1e-15);
        }
        assert!(qq_pvalues(&[]).is_err());
    }

    #[test]
    fn kde_single_point_peak() {
        let d = kde_with_bandwidth(&[0.0], &[0.0], 1.0).unwrap();
        assert_relative_eq!(d[0].1, 0.398_942_280_401, epsilon = 1e-11);
    }

    #[test]
    fn kde_rejects_constant_samples() {
        assert!(kde_curve(&[1.0, 1.0, 1.0], &[0.0]).is_err());
        assert!(kde_curve(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let samples: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 17.0).collect();
        let bw = silverman_bandwidth(&samples).unwrap();
        let lo = -10.0 * bw - 1.0;
        let hi = 101.0 / 17.0 + 10.0 * bw + 1.0;
        let grid: Vec<f64> = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0).collect();
        let d = kde_curve(&samples, &grid).unwrap();
        let integral: f64 = d
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        assert!((integral - 1.0).abs() < 0.01, "{integral}");
    }

    #[test]
    fn bandwidth_rule() {
        // sd = sqrt(2.5), IQR (type 7) of 1..5 = 2.
        let bw = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let expected = 0.9 * (2.5f64.sqrt()).min(2.0 / 1.34) * 5f64.powf(-0.2);
        assert_relative_eq!(bw, expected, max_relative = 1e-12);
    }

    #[test]
    fn ks_distance_examples() {
        assert_relative_eq!(ks_distance(&[0.0], |t| if t < 0.0 { 0.0 } else { 0.5 }), 0.5);
        let uniform: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!(ks_distance(&uniform, |t| t.clamp(0.0, 1.0)) <= 0.005 + 1e-12);
    }

    #[test]
    fn local_power_targets() {
        assert!((asymptotic_local_power(0.5, 0.05) - 0.1261).abs() < 1e-4);
        assert!((asymptotic_local_power(1.0, 0.05) - 0.2595).abs() < 1e-4);
        assert!((asymptotic_local_power(2.0, 0.05) - 0.6388).abs() < 1e-4);
        assert!((asymptotic_local_power(0.0, 0.05) - 0.05).abs() < 1e-8);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(
            ProcessSpec::iid_gaussian(),
            vec![10],
            vec![TestKind::StudentizedPerm],
        );
        assert!(spec.validate().is_err(), "n=10 below default minimum of 20");
        spec.studentizer.min_len = 10;
        assert!(spec.validate().is_ok());
        spec.alpha = 1.0;
        assert!(spec.validate().is_err());
        spec.alpha = 0.05;
        spec.replications = 0;
        assert!(rejection_grid(&spec).is_err());
    }

    #[test]
    fn single_replication_cell_is_zero_or_one() {
        let spec = ExperimentSpec {
            replications: 1,
            permutations: 50,
            seed: 3,
            ..ExperimentSpec::new(ProcessSpec::iid_gaussian(), vec![30], TestKind::ALL.to_vec())
        };
        let t = rejection_grid(&spec).unwrap();
        for row in &t.rows {
            let f = row.cells[0].frequency;
            assert!(f == 0.0 || f == 1.0);
        }
    }

    #[test]
    fn presets_enumerate_the_grids() {
        let t1 = table_preset("table1", Scale::Desk, 1).unwrap();
        assert_eq!(t1.len(), 4);
        assert!(t1.iter().all(|s| s.tests == CLASSIC_GRID && s.sample_sizes == TABLE_SAMPLE_SIZES));
        assert_eq!(
            t1.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
            ["m=0", "m=1", "m=2", "m=3"]
        );
        let t2 = table_preset("table2", Scale::Full, 1).unwrap();
        assert_eq!(t2.len(), 4);
        assert_eq!(t2[0].replications, 10_000);
        assert_eq!(t2[0].permutations, 2000);
        let t5 = table_preset("table5", Scale::Desk, 1).unwrap();
        assert_eq!(t5.len(), 8);
        assert!(t5.iter().all(|s| s.tests == [TestKind::CovPerm]));
        assert!(table_preset("table3", Scale::Desk, 1).is_err());
        for s in t1.iter().chain(&t2).chain(&t5) {
            s.validate().unwrap();
        }
    }

    #[test]
    fn csv_layout() {
        let spec = ExperimentSpec {
            replications: 4,
            permutations: 20,
            ..ExperimentSpec::new(
                ProcessSpec::iid_gaussian(),
                vec![20, 30],
                vec![TestKind::StudentizedPerm, TestKind::LjungBox],
            )
        };
        let csv = rejection_grid(&spec).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "process,test,20,30");
        assert!(lines[1].starts_with("\"iid, N(0,1) innov.\",Stud. Perm.,"));
        assert_eq!(lines.len(), 3);
    }
}
