//! Time series container and elementary sample statistics.
//!
//! Conventions: the sample variance uses a `1/n` divisor and the lag-`k`
//! autocovariance uses `1/(n-k)`, so `|autocorrelation|` can exceed one on
//! short series. Sums are accumulated left to right with Neumaier
//! compensation; agreement with other implementations is to roughly 1e-10
//! relative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite ordered sequence of finite real observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    /// Validates that the series is nonempty and every value is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("time series must contain at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn variance(&self) -> Result<f64> {
        variance(&self.values)
    }

    pub fn autocovariance(&self, lag: usize) -> Result<f64> {
        autocovariance(&self.values, lag)
    }

    pub fn autocorrelation(&self, lag: usize) -> Result<f64> {
        autocorrelation(&self.values, lag)
    }

    pub fn lag_statistics(&self, lag: usize) -> Result<LagStatistics> {
        LagStatistics::compute(&self.values, lag)
    }
}

impl<'de> Deserialize<'de> for TimeSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        TimeSeries::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        TimeSeries::new(values)
    }
}

/// Summary statistics of a series at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagStatistics {
    pub lag: usize,
    pub mean: f64,
    pub variance: f64,
    pub autocovariance: f64,
    pub autocorrelation: f64,
}

impl LagStatistics {
    pub fn compute(x: &[f64], lag: usize) -> Result<Self> {
        check_lag(x.len(), lag)?;
        let mean = mean(x);
        let variance = centered_variance(x, mean);
        if variance == 0.0 {
            return Err(Error::DegenerateSeries);
        }
        let autocovariance = centered_autocovariance(x, mean, lag);
        Ok(Self {
            lag,
            mean,
            variance,
            autocovariance,
            autocorrelation: autocovariance / variance,
        })
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub(crate) fn check_lag(n: usize, lag: usize) -> Result<()> {
    if lag == 0 || lag + 2 > n {
        return Err(Error::domain(format!(
            "lag {lag} out of range for series of length {n} (need 1 <= k <= n - 2)"
        )));
    }
    Ok(())
}

/// Arithmetic mean. Returns NaN for an empty slice; [`TimeSeries`] is never empty.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().copied().collect::<CompensatedSum>().value() / x.len() as f64
}

/// Sample variance with the `1/n` divisor.
pub fn variance(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::domain(format!(
            "variance needs at least 2 values, got {}",
            x.len()
        )));
    }
    Ok(centered_variance(x, mean(x)))
}

/// Lag-`k` autocovariance `(1/(n-k)) * sum (x_i - mean)(x_{i+k} - mean)`.
pub fn autocovariance(x: &[f64], lag: usize) -> Result<f64> {
    check_lag(x.len(), lag)?;
    Ok(centered_autocovariance(x, mean(x), lag))
}

/// Lag-`k` autocorrelation, `autocovariance / variance`.
pub fn autocorrelation(x: &[f64], lag: usize) -> Result<f64> {
    LagStatistics::compute(x, lag).map(|s| s.autocorrelation)
}

fn centered_variance(x: &[f64], mean: f64) -> f64 {
    let ss = x
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<CompensatedSum>()
        .value();
    ss / x.len() as f64
}

fn centered_autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let s = x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .collect::<CompensatedSum>()
        .value();
    s / (n - lag) as f64
}
