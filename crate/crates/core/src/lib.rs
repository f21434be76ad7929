//! Studentized permutation tests for serial correlation.
//!
//! A permutation test of zero lag-`k` autocorrelation is exact when the
//! observations are iid, but for merely uncorrelated dependent data the
//! plain test `sqrt(n) * rho_k` is miscalibrated. Dividing by a truncated
//! long-run variance estimate (see [`studentizer`]) restores asymptotic
//! validity while keeping exactness under iid.
//!
//! Modules:
//! * [`series`]: the [`TimeSeries`] container and sample moments.
//! * [`studentizer`]: long-run variance components and studentized statistics.
//! * [`perm`]: permutation reference distributions, p-values, the randomized test.
//! * [`classic`]: Ljung-Box, Box-Pierce and the chi-square tail.
//! * [`multiple`]: Bonferroni, Sidak and Holm combinations of per-lag p-values.
//! * [`process`]: seeded simulators for the benchmark processes.
//! * [`harness`]: Monte Carlo rejection grids, power curves, KDE and QQ data.
//! * [`data`]: price CSV ingestion, log returns, the multi-lag pipeline.

pub mod classic;
pub mod data;
pub mod error;
pub mod harness;
pub mod multiple;
pub mod perm;
pub mod process;
pub mod rng;
pub mod series;
pub mod studentizer;

pub use error::{Error, Result};
pub use perm::{PermutationDistribution, PermutationScheme, Statistic, TestResult};
pub use series::TimeSeries;
pub use studentizer::StudentizerConfig;
