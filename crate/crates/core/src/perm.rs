//! Permutation reference distributions, p-values and the randomized test.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series;
use crate::studentizer::{self, StudentizerConfig};

/// A test statistic evaluated on (possibly permuted) data.
pub trait Statistic: Sync {
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

impl<F> Statistic for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

/// `sqrt(n) * rho_k`, the unstudentized statistic.
#[derive(Debug, Clone, Copy)]
pub struct Autocorrelation {
    pub lag: usize,
}

impl Statistic for Autocorrelation {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((x.len() as f64).sqrt() * series::autocorrelation(x, self.lag)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StudentizedAutocorrelation(pub StudentizerConfig);

impl Statistic for StudentizedAutocorrelation {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        studentizer::studentized_rho_statistic(x, &self.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StudentizedAutocovariance(pub StudentizerConfig);

impl Statistic for StudentizedAutocovariance {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        studentizer::studentized_cov_statistic(x, &self.0)
    }
}

pub const DEFAULT_PERMUTATIONS: usize = 2000;
pub const DEFAULT_ENUMERATION_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SchemeMode {
    FullEnumeration,
    MonteCarlo { permutations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationScheme {
    #[serde(flatten)]
    pub mode: SchemeMode,
    pub seed: u64,
    /// Largest `n` for which full enumeration is allowed.
    pub enumeration_limit: usize,
}

impl PermutationScheme {
    pub fn monte_carlo(permutations: usize, seed: u64) -> Self {
        Self {
            mode: SchemeMode::MonteCarlo { permutations },
            seed,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }

    pub fn full_enumeration() -> Self {
        Self {
            mode: SchemeMode::FullEnumeration,
            seed: 0,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

/// Whether the reference set is the whole symmetric group or a sample of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Exact,
    Sampled,
}

/// Statistic values over the reference set of permutations. The identity
/// permutation is always a member, so the observed statistic is too.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationDistribution {
    sorted: Vec<f64>,
    observed: f64,
    kind: ReferenceKind,
}

impl PermutationDistribution {
    /// Builds a distribution from raw values; `observed` must be among them.
    pub fn from_values(mut values: Vec<f64>, observed: f64, kind: ReferenceKind) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) || observed.is_nan() {
            return Err(Error::domain("permutation statistic evaluated to NaN"));
        }
        if !values.contains(&observed) {
            return Err(Error::domain(
                "observed statistic must be a member of the reference set",
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            sorted: values,
            observed,
            kind,
        })
    }

    /// Sampled distribution over the identity plus the given index permutations.
    pub fn from_permutations<S, I, P>(x: &[f64], statistic: &S, permutations: I) -> Result<Self>
    where
        S: Statistic + ?Sized,
        I: IntoIterator<Item = P>,
        P: AsRef<[usize]>,
    {
        let observed = statistic.evaluate(x)?;
        let mut values = vec![observed];
        let mut buf = vec![0.0; x.len()];
        for p in permutations {
            let p = p.as_ref();
            if p.len() != x.len() {
                return Err(Error::domain("permutation length differs from series length"));
            }
            values.push(evaluate_permuted(x, p, statistic, &mut buf)?);
        }
        Self::from_values(values, observed, ReferenceKind::Sampled)
    }

    pub fn observed(&self) -> f64 {
        self.observed
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Reference values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of reference values `<= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.len() as f64
    }

    /// One- and two-sided p-values of `observed` against the reference set.
    /// Ties count toward rejection.
    pub fn p_values(&self, observed: f64) -> PValues {
        let total = self.len() as f64;
        let at_least = self.len() - self.sorted.partition_point(|&v| v < observed);
        let at_most = self.sorted.partition_point(|&v| v <= observed);
        let abs_obs = observed.abs();
        let two_sided = self.sorted.iter().filter(|v| v.abs() >= abs_obs).count();
        PValues {
            greater: at_least as f64 / total,
            less: at_most as f64 / total,
            two_sided: two_sided as f64 / total,
        }
    }

    /// The randomized permutation test `phi` at level `alpha` for the
    /// observed statistic. For sampled reference sets the decision falls
    /// back to `p_greater <= alpha` with no randomization.
    pub fn randomized_test(&self, alpha: f64) -> Result<TestResult> {
        check_alpha(alpha)?;
        let total = self.len();
        let alpha_total = alpha * total as f64;
        // Guard against alpha * N landing a rounding error below an integer.
        let cut = (alpha_total * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
        let m = total - cut.min(total - 1);
        let critical = self.sorted[m - 1];
        let m_plus = total - self.sorted.partition_point(|&v| v <= critical);
        let m_zero = self.sorted.partition_point(|&v| v <= critical)
            - self.sorted.partition_point(|&v| v < critical);
        let p = self.p_values(self.observed);

        let (decision, randomization) = match self.kind {
            ReferenceKind::Exact => {
                let a = ((alpha_total - m_plus as f64) / m_zero as f64).clamp(0.0, 1.0);
                let decision = if self.observed > critical {
                    Decision::Reject
                } else if self.observed == critical {
                    Decision::RandomizedReject { probability: a }
                } else {
                    Decision::Accept
                };
                (decision, a)
            }
            ReferenceKind::Sampled => {
                let decision = if p.greater <= alpha {
                    Decision::Reject
                } else {
                    Decision::Accept
                };
                (decision, 0.0)
            }
        };
        Ok(TestResult {
            statistic: self.observed,
            p_greater: p.greater,
            p_less: p.less,
            p_two_sided: p.two_sided,
            m_plus,
            m_zero,
            randomization,
            critical_value: critical,
            decision,
            alpha,
            reference_size: total,
            reference: self.kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub greater: f64,
    pub less: f64,
    pub two_sided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Decision {
    Reject,
    Accept,
    RandomizedReject { probability: f64 },
}

impl Decision {
    /// Rejection probability `phi` implied by the decision.
    pub fn phi(&self) -> f64 {
        match *self {
            Decision::Reject => 1.0,
            Decision::Accept => 0.0,
            Decision::RandomizedReject { probability } => probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_greater: f64,
    pub p_less: f64,
    pub p_two_sided: f64,
    /// Reference values strictly above the critical order statistic.
    pub m_plus: usize,
    /// Reference values equal to the critical order statistic.
    pub m_zero: usize,
    pub randomization: f64,
    pub critical_value: f64,
    pub decision: Decision,
    pub alpha: f64,
    pub reference_size: usize,
    pub reference: ReferenceKind,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn evaluate_permuted<S: Statistic + ?Sized>(
    x: &[f64],
    perm: &[usize],
    statistic: &S,
    buf: &mut [f64],
) -> Result<f64> {
    for (slot, &i) in buf.iter_mut().zip(perm) {
        *slot = x[i];
    }
    statistic.evaluate(buf)
}

/// Evaluates `statistic` over the scheme's reference set of reorderings of `x`.
///
/// Monte Carlo draw `d` shuffles the identity with ChaCha stream `d` under the
/// scheme seed, so the result is independent of evaluation order.
pub fn permutation_distribution<S: Statistic + ?Sized>(
    x: &[f64],
    statistic: &S,
    scheme: &PermutationScheme,
) -> Result<PermutationDistribution> {
    let n = x.len();
    match scheme.mode {
        SchemeMode::FullEnumeration => {
            if n > scheme.enumeration_limit {
                return Err(Error::EnumerationTooLarge {
                    n,
                    max: scheme.enumeration_limit,
                });
            }
            let observed = statistic.evaluate(x)?;
            let mut buf = vec![0.0; n];
            let values = (0..n)
                .permutations(n)
                .map(|p| evaluate_permuted(x, &p, statistic, &mut buf))
                .collect::<Result<Vec<_>>>()?;
            PermutationDistribution::from_values(values, observed, ReferenceKind::Exact)
        }
        SchemeMode::MonteCarlo { permutations } => {
            if permutations == 0 {
                return Err(Error::domain("monte-carlo scheme needs at least one permutation"));
            }
            let observed = statistic.evaluate(x)?;
            let draws = (0..permutations)
                .into_par_iter()
                .map_init(
                    || (vec![0usize; n], vec![0.0; n]),
                    |(idx, buf), d| {
                        idx.iter_mut().enumerate().for_each(|(i, slot)| *slot = i);
                        idx.shuffle(&mut rng::substream(scheme.seed, d as u64));
                        evaluate_permuted(x, idx, statistic, buf)
                    },
                )
                .collect::<Result<Vec<_>>>()?;
            let mut values = Vec::with_capacity(permutations + 1);
            values.push(observed);
            values.extend(draws);
            PermutationDistribution::from_values(values, observed, ReferenceKind::Sampled)
        }
    }
}

/// Builds the reference distribution and runs the test in one step.
pub fn permutation_test<S: Statistic + ?Sized>(
    x: &[f64],
    statistic: &S,
    scheme: &PermutationScheme,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    permutation_distribution(x, statistic, scheme)?.randomized_test(alpha)
}
