//! Ljung-Box and Box-Pierce portmanteau tests with chi-square p-values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{self, check_lag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PortmanteauVariant {
    LjungBox,
    BoxPierce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortmanteauStatistic {
    pub variant: PortmanteauVariant,
    pub lags: usize,
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
}

fn squared_autocorrelations(x: &[f64], lags: usize) -> Result<Vec<f64>> {
    if lags == 0 {
        return Err(Error::domain("number of lags must be at least 1"));
    }
    check_lag(x.len(), lags)?;
    (1..=lags)
        .map(|k| series::autocorrelation(x, k).map(|r| r * r))
        .collect()
}

/// `Q = n (n + 2) sum_{k=1..r} rho_k^2 / (n - k)`.
pub fn ljung_box(x: &[f64], lags: usize) -> Result<PortmanteauStatistic> {
    let n = x.len() as f64;
    let q = squared_autocorrelations(x, lags)?
        .iter()
        .enumerate()
        .map(|(i, r2)| r2 / (n - (i + 1) as f64))
        .sum::<f64>()
        * n
        * (n + 2.0);
    finish(PortmanteauVariant::LjungBox, lags, q)
}

/// `Q = n sum_{k=1..r} rho_k^2`.
pub fn box_pierce(x: &[f64], lags: usize) -> Result<PortmanteauStatistic> {
    let q = squared_autocorrelations(x, lags)?.iter().sum::<f64>() * x.len() as f64;
    finish(PortmanteauVariant::BoxPierce, lags, q)
}

fn finish(variant: PortmanteauVariant, lags: usize, q: f64) -> Result<PortmanteauStatistic> {
    Ok(PortmanteauStatistic {
        variant,
        lags,
        q,
        df: lags,
        p_value: chi_square_upper_tail(q, lags)?,
    })
}

/// `P(chi^2_df > q)`.
pub fn chi_square_upper_tail(q: f64, df: usize) -> Result<f64> {
    if q.is_nan() || q < 0.0 {
        return Err(Error::domain(format!("chi-square quantile must be >= 0, got {q}")));
    }
    if df == 0 {
        return Err(Error::domain("chi-square degrees of freedom must be >= 1"));
    }
    Ok(regularized_gamma_q(df as f64 / 2.0, q / 2.0))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `a > 0` (Lanczos, g = 7).
pub fn ln_gamma(a: f64) -> f64 {
    if a < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let a = a - 1.0;
    let t = a + LANCZOS_G + 0.5;
    let series = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (a + (i + 1) as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (a + 0.5) * t.ln() - t + series.ln()
}

const MAX_ITER: usize = 100_000;
const TOL: f64 = 1e-16;

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * TOL {
            break;
        }
    }
    sum * prefactor(a, x)
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < TOL {
            break;
        }
    }
    prefactor(a, x) * h
}
