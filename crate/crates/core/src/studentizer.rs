//! Long-run variance estimators and the studentized autocorrelation and
//! autocovariance statistics.
//!
//! For a series `x` with lag `k`, let `Y_i = (x_i - m)(x_{i+k} - m)` for
//! `i < n - k` and `Z_i = (x_i - m)^2` for `i < n`, where `m` is the sample
//! mean. With truncation `b` the estimators are flat (untapered) truncated
//! sums of lagged cross products of the centered `Y` and `Z`, all scaled by
//! `1/n`:
//!
//! * `K^2`: long-run variance of `Z`,
//! * `T^2`: long-run variance of `Y`,
//! * `nu`: long-run covariance of `Y` and `Z`,
//!
//! and the studentizing factor is
//! `gamma^2 = max(eps, (T^2 - 2 rho nu + rho^2 K^2) / sigma^4)`.
//! Under a random permutation of the data `gamma^2` tends to one, which is
//! why the statistic must be recomputed on every permuted series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{self, check_lag};

/// Truncation rule mapping the series length to the number of lagged terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `floor(n^(1/3)) + 1`.
    CubeRoot,
    Fixed(usize),
}

impl BandwidthRule {
    pub fn bandwidth(&self, n: usize) -> usize {
        match *self {
            BandwidthRule::CubeRoot => integer_cube_root(n) + 1,
            BandwidthRule::Fixed(b) => b,
        }
    }
}

impl std::str::FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube-root" | "cuberoot" => Ok(BandwidthRule::CubeRoot),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&b| b >= 1)
                .map(BandwidthRule::Fixed)
                .ok_or_else(|| {
                    Error::domain(format!(
                        "bandwidth rule must be `cube-root` or a positive integer, got `{other}`"
                    ))
                }),
        }
    }
}

fn integer_cube_root(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r > 0 && r * r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentizerConfig {
    pub lag: usize,
    pub bandwidth: BandwidthRule,
    /// Lower bound applied to the variance estimate.
    pub epsilon: f64,
    pub min_len: usize,
}

impl Default for StudentizerConfig {
    fn default() -> Self {
        Self {
            lag: 1,
            bandwidth: BandwidthRule::CubeRoot,
            epsilon: 1e-6,
            min_len: 20,
        }
    }
}

impl StudentizerConfig {
    pub fn with_lag(self, lag: usize) -> Self {
        Self { lag, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::domain("lag must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!(
                "variance floor must be positive, got {}",
                self.epsilon
            )));
        }
        if self.bandwidth == BandwidthRule::Fixed(0) {
            return Err(Error::domain("fixed bandwidth must be at least 1"));
        }
        Ok(())
    }

    /// Truncation actually used for a series of length `n`, and whether the
    /// configured rule had to be clamped to `n - k - 2`.
    pub fn effective_bandwidth(&self, n: usize) -> Result<(usize, bool)> {
        let cap = n.saturating_sub(self.lag + 2);
        if cap == 0 {
            return Err(Error::SeriesTooShort {
                len: n,
                min: self.lag + 3,
            });
        }
        let b = self.bandwidth.bandwidth(n);
        Ok(if b > cap { (cap, true) } else { (b, false) })
    }

    fn check_series(&self, x: &[f64]) -> Result<()> {
        self.validate()?;
        if x.len() < self.min_len {
            return Err(Error::SeriesTooShort {
                len: x.len(),
                min: self.min_len,
            });
        }
        check_lag(x.len(), self.lag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub kappa_sq: f64,
    pub tau_sq: f64,
    pub nu: f64,
    /// Studentizing factor after the floor, always `>= epsilon`.
    pub gamma_sq: f64,
    /// True iff the raw combination fell below `epsilon`.
    pub floored: bool,
    pub bandwidth: usize,
    pub bandwidth_clamped: bool,
    pub variance: f64,
    pub autocovariance: f64,
    pub autocorrelation: f64,
}

/// A studentized statistic together with what went into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Studentized {
    pub value: f64,
    /// The unscaled estimate (autocorrelation or autocovariance).
    pub estimate: f64,
    /// Floored squared scale the estimate was divided by.
    pub scale_sq: f64,
    pub floored: bool,
    pub bandwidth_clamped: bool,
}

/// The product series `Y` (length `n - k`) and squared deviations `Z` (length `n`).
pub fn derived_series(x: &[f64], lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lag(x.len(), lag)?;
    let mean = series::mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let y = dev[..dev.len() - lag]
        .iter()
        .zip(&dev[lag..])
        .map(|(a, b)| a * b)
        .collect();
    let z = dev.iter().map(|d| d * d).collect();
    Ok((y, z))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn centered(mut v: Vec<f64>) -> (Vec<f64>, f64) {
    let mean = series::mean(&v);
    v.iter_mut().for_each(|e| *e -= mean);
    (v, mean)
}

/// `sum_i c_i^2 + 2 sum_{j=1..b} sum_i c_i c_{i+j}`, unscaled.
fn truncated_long_run_sum(c: &[f64], bandwidth: usize) -> f64 {
    let lagged: f64 = (1..=bandwidth.min(c.len().saturating_sub(1)))
        .map(|j| dot(&c[..c.len() - j], &c[j..]))
        .sum();
    dot(c, c) + 2.0 * lagged
}

pub fn variance_components(x: &[f64], cfg: &StudentizerConfig) -> Result<VarianceComponents> {
    cfg.check_series(x)?;
    let n = x.len();
    let k = cfg.lag;
    let (bandwidth, bandwidth_clamped) = cfg.effective_bandwidth(n)?;

    let (y, z) = derived_series(x, k)?;
    let (yc, autocovariance) = centered(y);
    let (zc, variance) = centered(z);
    if variance == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let ny = yc.len();
    let scale = 1.0 / n as f64;

    let kappa_sq = scale * truncated_long_run_sum(&zc, bandwidth);
    let tau_sq = scale * truncated_long_run_sum(&yc, bandwidth);

    // Same-index term, Z leading Y, then Y leading Z.
    let mut nu = dot(&yc, &zc[..ny]);
    for j in 1..=bandwidth {
        if j < ny {
            nu += dot(&zc[..ny - j], &yc[j..]);
        }
        let upper = (n - j).min(ny);
        nu += dot(&yc[..upper], &zc[j..j + upper]);
    }
    nu *= scale;

    let autocorrelation = autocovariance / variance;
    let raw = (tau_sq - 2.0 * autocorrelation * nu + autocorrelation * autocorrelation * kappa_sq)
        / (variance * variance);
    let floored = raw.is_nan() || raw < cfg.epsilon;
    Ok(VarianceComponents {
        kappa_sq,
        tau_sq,
        nu,
        gamma_sq: if floored { cfg.epsilon } else { raw },
        floored,
        bandwidth,
        bandwidth_clamped,
        variance,
        autocovariance,
        autocorrelation,
    })
}

/// `sqrt(n) * rho_k / gamma_k`.
pub fn studentized_rho(x: &[f64], cfg: &StudentizerConfig) -> Result<Studentized> {
    let c = variance_components(x, cfg)?;
    Ok(Studentized {
        value: (x.len() as f64).sqrt() * c.autocorrelation / c.gamma_sq.sqrt(),
        estimate: c.autocorrelation,
        scale_sq: c.gamma_sq,
        floored: c.floored,
        bandwidth_clamped: c.bandwidth_clamped,
    })
}

pub fn studentized_rho_statistic(x: &[f64], cfg: &StudentizerConfig) -> Result<f64> {
    studentized_rho(x, cfg).map(|s| s.value)
}

/// `sqrt(n) * c_k / T_k`, with `T_k^2` floored at `epsilon`.
pub fn studentized_cov(x: &[f64], cfg: &StudentizerConfig) -> Result<Studentized> {
    cfg.check_series(x)?;
    let n = x.len();
    let (bandwidth, bandwidth_clamped) = cfg.effective_bandwidth(n)?;
    let mean = series::mean(x);
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateSeries);
    }
    let y: Vec<f64> = x[..n - cfg.lag]
        .iter()
        .zip(&x[cfg.lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .collect();
    let (yc, autocovariance) = centered(y);
    let tau_sq = truncated_long_run_sum(&yc, bandwidth) / n as f64;
    let floored = tau_sq.is_nan() || tau_sq < cfg.epsilon;
    let scale_sq = if floored { cfg.epsilon } else { tau_sq };
    Ok(Studentized {
        value: (n as f64).sqrt() * autocovariance / scale_sq.sqrt(),
        estimate: autocovariance,
        scale_sq,
        floored,
        bandwidth_clamped,
    })
}

pub fn studentized_cov_statistic(x: &[f64], cfg: &StudentizerConfig) -> Result<f64> {
    studentized_cov(x, cfg).map(|s| s.value)
}
