//! Familywise-error corrections for combining per-lag p-values into a
//! portmanteau decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::check_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    #[default]
    Bonferroni,
    Sidak,
    Holm,
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Correction::Bonferroni),
            "sidak" => Ok(Correction::Sidak),
            "holm" => Ok(Correction::Holm),
            other => Err(Error::domain(format!("unknown correction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortmanteauResult {
    pub lags: usize,
    pub p_values: Vec<f64>,
    pub correction: Correction,
    pub alpha: f64,
    /// Per-hypothesis cutoff for single-step corrections, or the first
    /// (smallest) step cutoff for Holm.
    pub cutoff: f64,
    /// Rejected lags, 1-based, ascending.
    pub rejected: Vec<usize>,
    pub global_reject: bool,
}

fn validate(p_values: &[f64], alpha: f64) -> Result<()> {
    if p_values.is_empty() {
        return Err(Error::domain("at least one p-value is required"));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
    }
    check_alpha(alpha)
}

fn single_step(
    p_values: &[f64],
    alpha: f64,
    correction: Correction,
    cutoff: f64,
) -> PortmanteauResult {
    let rejected: Vec<usize> = p_values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= cutoff)
        .map(|(i, _)| i + 1)
        .collect();
    PortmanteauResult {
        lags: p_values.len(),
        p_values: p_values.to_vec(),
        correction,
        alpha,
        cutoff,
        global_reject: !rejected.is_empty(),
        rejected,
    }
}

/// Rejects every lag with `p <= alpha / r`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<PortmanteauResult> {
    validate(p_values, alpha)?;
    let cutoff = alpha / p_values.len() as f64;
    Ok(single_step(p_values, alpha, Correction::Bonferroni, cutoff))
}

pub fn sidak_cutoff(alpha: f64, r: usize) -> f64 {
    if r == 1 {
        alpha
    } else {
        -((-alpha).ln_1p() / r as f64).exp_m1()
    }
}

/// Rejects every lag with `p <= 1 - (1 - alpha)^(1/r)`.
pub fn sidak(p_values: &[f64], alpha: f64) -> Result<PortmanteauResult> {
    validate(p_values, alpha)?;
    let cutoff = sidak_cutoff(alpha, p_values.len());
    Ok(single_step(p_values, alpha, Correction::Sidak, cutoff))
}

/// Holm step-down: walk the p-values in ascending order (ties by lag) and
/// reject while `p_(i) <= alpha / (r - i + 1)`.
pub fn holm(p_values: &[f64], alpha: f64) -> Result<PortmanteauResult> {
    validate(p_values, alpha)?;
    let r = p_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut rejected: Vec<usize> = order
        .iter()
        .enumerate()
        .take_while(|&(step, &i)| p_values[i] <= alpha / (r - step) as f64)
        .map(|(_, &i)| i + 1)
        .collect();
    rejected.sort_unstable();
    Ok(PortmanteauResult {
        lags: r,
        p_values: p_values.to_vec(),
        correction: Correction::Holm,
        alpha,
        cutoff: alpha / r as f64,
        global_reject: !rejected.is_empty(),
        rejected,
    })
}

pub fn apply(correction: Correction, p_values: &[f64], alpha: f64) -> Result<PortmanteauResult> {
    match correction {
        Correction::Bonferroni => bonferroni(p_values, alpha),
        Correction::Sidak => sidak(p_values, alpha),
        Correction::Holm => holm(p_values, alpha),
    }
}
