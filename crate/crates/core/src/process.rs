//! Seeded simulators for the data-generating processes used in the
//! experiments: iid noise, products of Gaussian powers (m-dependent),
//! AR(2) and its product variant, local-alternative AR(1) arrays and a
//! plain ARMA recursion.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::series::TimeSeries;

pub const DEFAULT_BURN_IN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum InnovationLaw {
    Gaussian,
    /// Uniform on `[-1, 1]`.
    Uniform,
    StudentT { df: f64 },
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::StudentT { df } if !(df > 0.0 && df.is_finite()) => Err(Error::domain(
                format!("student-t degrees of freedom must be positive, got {df}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InnovationLaw::Gaussian => "N(0,1)".into(),
            InnovationLaw::Uniform => "U[-1,1]".into(),
            InnovationLaw::StudentT { df } => format!("t_{df}"),
        }
    }

    fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        Ok(match *self {
            InnovationLaw::Gaussian => InnovationSampler::Gaussian,
            InnovationLaw::Uniform => InnovationSampler::Uniform(
                Uniform::new_inclusive(-1.0, 1.0).map_err(|e| Error::domain(e.to_string()))?,
            ),
            InnovationLaw::StudentT { df } => InnovationSampler::StudentT {
                chi: ChiSquared::new(df).map_err(|e| Error::domain(e.to_string()))?,
                df,
            },
        })
    }
}

enum InnovationSampler {
    Gaussian,
    Uniform(Uniform<f64>),
    StudentT { chi: ChiSquared<f64>, df: f64 },
}

impl InnovationSampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationSampler::Gaussian => StandardNormal.sample(rng),
            InnovationSampler::Uniform(u) => u.sample(rng),
            InnovationSampler::StudentT { chi, df } => {
                let z: f64 = StandardNormal.sample(rng);
                z / (chi.sample(rng) / df).sqrt()
            }
        }
    }
}

/// One draw from `law`. Student-t draws are a standard normal over
/// `sqrt(chi2(df) / df)`.
pub fn sample_innovation<R: Rng + ?Sized>(law: &InnovationLaw, rng: &mut R) -> Result<f64> {
    Ok(law.sampler()?.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProcessSpec {
    Iid {
        innovation: InnovationLaw,
    },
    /// `X_i = prod_{j=i..i+m} G_j^power` with `G` iid standard normal:
    /// products of `m + 1` consecutive terms, hence m-dependent.
    MDependentProduct { m: usize, power: u32 },
    /// AR(1) with coefficient `h / sqrt(n)`, started from its stationary law.
    Ar1Local { h: f64 },
    Ar2 {
        phi: f64,
        rho: f64,
        innovation: InnovationLaw,
        burn_in: usize,
    },
    /// Interleaved lag-2 products of two independent AR(1)(rho) chains.
    Ar2Product { rho: f64, burn_in: usize },
    Arma {
        ar: Vec<f64>,
        ma: Vec<f64>,
        innovation: InnovationLaw,
        burn_in: usize,
    },
}

impl ProcessSpec {
    pub fn iid_gaussian() -> Self {
        ProcessSpec::Iid {
            innovation: InnovationLaw::Gaussian,
        }
    }

    pub fn ar2(phi: f64, rho: f64, innovation: InnovationLaw) -> Self {
        ProcessSpec::Ar2 {
            phi,
            rho,
            innovation,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    /// Validation that does not depend on the series length.
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Iid { innovation } => innovation.validate(),
            ProcessSpec::MDependentProduct { power, .. } => {
                if power % 2 == 0 {
                    Err(Error::domain(format!("product power must be odd, got {power}")))
                } else {
                    Ok(())
                }
            }
            ProcessSpec::Ar1Local { h } => {
                if *h >= 0.0 && h.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("local alternative h must be >= 0, got {h}")))
                }
            }
            ProcessSpec::Ar2 {
                phi,
                rho,
                innovation,
                ..
            } => {
                innovation.validate()?;
                check_stationary(&[*phi, *rho])
            }
            ProcessSpec::Ar2Product { rho, .. } => check_stationary(&[*rho]),
            ProcessSpec::Arma {
                ar, ma, innovation, ..
            } => {
                innovation.validate()?;
                if ar.iter().chain(ma).any(|c| !c.is_finite()) {
                    return Err(Error::domain("ARMA coefficients must be finite"));
                }
                check_stationary(ar)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProcessSpec::Iid { innovation } => format!("iid, {} innov.", innovation.label()),
            ProcessSpec::MDependentProduct { m, power: 1 } => format!("m={m}"),
            ProcessSpec::MDependentProduct { m, power } => format!("m={m}, r={power}"),
            ProcessSpec::Ar1Local { h } => format!("AR(1) local, h={h}"),
            ProcessSpec::Ar2 {
                phi,
                rho,
                innovation,
                ..
            } => {
                if *phi == 0.0 {
                    format!("AR(2), {} innov.", innovation.label())
                } else {
                    format!("AR(2) phi={phi} rho={rho}, {} innov.", innovation.label())
                }
            }
            ProcessSpec::Ar2Product { .. } => "AR(2) Prod., N(0,1) innov.".into(),
            ProcessSpec::Arma { ar, ma, .. } => format!("ARMA({},{})", ar.len(), ma.len()),
        }
    }

    /// Simulates `n` observations from the stream seeded by `seed`.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<TimeSeries> {
        self.generate(n, &mut rng::stream(seed, &[]))
    }

    pub fn generate(&self, n: usize, rng: &mut StreamRng) -> Result<TimeSeries> {
        self.validate()?;
        if n == 0 {
            return Err(Error::domain("series length must be positive"));
        }
        let values = match self {
            ProcessSpec::Iid { innovation } => {
                let s = innovation.sampler()?;
                (0..n).map(|_| s.sample(rng)).collect()
            }
            ProcessSpec::MDependentProduct { m, power } => m_dependent_product(*m, *power, n, rng),
            ProcessSpec::Ar1Local { h } => ar1_local(*h, n, rng)?,
            ProcessSpec::Ar2 {
                phi,
                rho,
                innovation,
                burn_in,
            } => arma(&[*phi, *rho], &[], &innovation.sampler()?, n, *burn_in, rng),
            ProcessSpec::Ar2Product { rho, burn_in } => ar2_product(*rho, n, *burn_in, rng),
            ProcessSpec::Arma {
                ar,
                ma,
                innovation,
                burn_in,
            } => arma(ar, ma, &innovation.sampler()?, n, *burn_in, rng),
        };
        TimeSeries::new(values)
    }
}

/// Step-down (Schur-Cohn) check that `1 - sum phi_i z^i` has no roots in
/// the closed unit disk: every reflection coefficient must be below one
/// in magnitude.
fn check_stationary(ar: &[f64]) -> Result<()> {
    let mut a = ar.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
        } else {
            break;
        }
    }
    while let Some(kappa) = a.pop() {
        if kappa.is_nan() || kappa.abs() >= 1.0 {
            return Err(Error::domain(format!(
                "autoregressive coefficients {ar:?} are not stationary"
            )));
        }
        let p = a.len();
        let prev = a.clone();
        for i in 0..p {
            a[i] = (prev[i] + kappa * prev[p - 1 - i]) / (1.0 - kappa * kappa);
        }
    }
    Ok(())
}

fn m_dependent_product(m: usize, power: u32, n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let z: Vec<f64> = (0..n + m)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g.powi(power as i32)
        })
        .collect();
    z.windows(m + 1).map(|w| w.iter().product()).collect()
}

fn ar1_local(h: f64, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let rho = h / (n as f64).sqrt();
    if rho >= 1.0 {
        return Err(Error::domain(format!(
            "local alternative needs h < sqrt(n); got h={h}, n={n}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    let first: f64 = StandardNormal.sample(rng);
    out.push(first / (1.0 - rho * rho).sqrt());
    for i in 1..n {
        let e: f64 = StandardNormal.sample(rng);
        out.push(rho * out[i - 1] + e);
    }
    Ok(out)
}

/// AR(p) + MA(q) recursion from a zero state, discarding `burn_in` values.
fn arma(
    ar: &[f64],
    ma: &[f64],
    innovations: &InnovationSampler,
    n: usize,
    burn_in: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let total = n + burn_in;
    let mut x = Vec::with_capacity(total);
    let mut eps = Vec::with_capacity(total);
    for t in 0..total {
        let e = innovations.sample(rng);
        let mut v = e;
        for (i, phi) in ar.iter().enumerate() {
            if t > i {
                v += phi * x[t - 1 - i];
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v += theta * eps[t - 1 - j];
            }
        }
        x.push(v);
        eps.push(e);
    }
    x.split_off(burn_in)
}

fn ar2_product(rho: f64, n: usize, burn_in: usize, rng: &mut StreamRng) -> Vec<f64> {
    let chain_len = n.div_ceil(2) + 1;
    let normal = InnovationSampler::Gaussian;
    let odd = arma(&[rho], &[], &normal, chain_len, burn_in, rng);
    let even = arma(&[rho], &[], &normal, chain_len, burn_in, rng);
    (0..n)
        .map(|s| {
            let (chain, j) = if s % 2 == 0 {
                (&odd, s / 2)
            } else {
                (&even, s / 2)
            };
            chain[j] * chain[j + 1]
        })
        .collect()
}

pub fn gen_m_dependent_product(m: usize, power: u32, n: usize, seed: u64) -> Result<TimeSeries> {
    ProcessSpec::MDependentProduct { m, power }.simulate(n, seed)
}

pub fn gen_ar2(
    phi: f64,
    rho: f64,
    n: usize,
    innovation: InnovationLaw,
    seed: u64,
    burn_in: usize,
) -> Result<TimeSeries> {
    ProcessSpec::Ar2 {
        phi,
        rho,
        innovation,
        burn_in,
    }
    .simulate(n, seed)
}

pub fn gen_ar2_product(rho: f64, n: usize, seed: u64, burn_in: usize) -> Result<TimeSeries> {
    ProcessSpec::Ar2Product { rho, burn_in }.simulate(n, seed)
}

pub fn gen_ar1_local(h: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    ProcessSpec::Ar1Local { h }.simulate(n, seed)
}

/// Flat key-value form of a [`ProcessSpec`] plus an optional seed, read and
/// written as TOML.
///
/// ```toml
/// kind = "ar2"
/// phi = 0.0
/// rho = 0.5
/// innovation = "student-t"
/// df = 9.5
/// burn_in = 1000
/// seed = 7
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn required<T>(value: Option<T>, key: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("process kind `{kind}` requires `{key}`")))
}

impl ProcessConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fails only for seeds above `i64::MAX`, which TOML integers cannot hold.
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn innovation_law(&self) -> Result<InnovationLaw> {
        let law = match self.innovation.as_deref().unwrap_or("gaussian") {
            "gaussian" | "normal" => InnovationLaw::Gaussian,
            "uniform" => InnovationLaw::Uniform,
            "student-t" | "t" => InnovationLaw::StudentT {
                df: required(self.df, "df", "student-t innovation")?,
            },
            other => return Err(Error::Config(format!("unknown innovation law `{other}`"))),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn to_spec(&self) -> Result<ProcessSpec> {
        let kind = self.kind.as_str();
        let burn_in = self.burn_in.unwrap_or(DEFAULT_BURN_IN);
        let spec = match kind {
            "iid" => ProcessSpec::Iid {
                innovation: self.innovation_law()?,
            },
            "m-dependent-product" => ProcessSpec::MDependentProduct {
                m: required(self.m, "m", kind)?,
                power: self.power.unwrap_or(1),
            },
            "ar1-local" => ProcessSpec::Ar1Local {
                h: required(self.h, "h", kind)?,
            },
            "ar2" => ProcessSpec::Ar2 {
                phi: self.phi.unwrap_or(0.0),
                rho: required(self.rho, "rho", kind)?,
                innovation: self.innovation_law()?,
                burn_in,
            },
            "ar2-product" => ProcessSpec::Ar2Product {
                rho: required(self.rho, "rho", kind)?,
                burn_in,
            },
            "arma" => ProcessSpec::Arma {
                ar: self.ar.clone().unwrap_or_default(),
                ma: self.ma.clone().unwrap_or_default(),
                innovation: self.innovation_law()?,
                burn_in,
            },
            other => return Err(Error::Config(format!("unknown process kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProcessSpec, seed: Option<u64>) -> Self {
        let mut c = ProcessConfig {
            seed,
            ..Default::default()
        };
        let set_law = |c: &mut ProcessConfig, law: &InnovationLaw| match law {
            InnovationLaw::Gaussian => c.innovation = Some("gaussian".into()),
            InnovationLaw::Uniform => c.innovation = Some("uniform".into()),
            InnovationLaw::StudentT { df } => {
                c.innovation = Some("student-t".into());
                c.df = Some(*df);
            }
        };
        match spec {
            ProcessSpec::Iid { innovation } => {
                c.kind = "iid".into();
                set_law(&mut c, innovation);
            }
            ProcessSpec::MDependentProduct { m, power } => {
                c.kind = "m-dependent-product".into();
                c.m = Some(*m);
                c.power = Some(*power);
            }
            ProcessSpec::Ar1Local { h } => {
                c.kind = "ar1-local".into();
                c.h = Some(*h);
            }
            ProcessSpec::Ar2 {
                phi,
                rho,
                innovation,
                burn_in,
            } => {
                c.kind = "ar2".into();
                c.phi = Some(*phi);
                c.rho = Some(*rho);
                c.burn_in = Some(*burn_in);
                set_law(&mut c, innovation);
            }
            ProcessSpec::Ar2Product { rho, burn_in } => {
                c.kind = "ar2-product".into();
                c.rho = Some(*rho);
                c.burn_in = Some(*burn_in);
            }
            ProcessSpec::Arma {
                ar,
                ma,
                innovation,
                burn_in,
            } => {
                c.kind = "arma".into();
                c.ar = Some(ar.clone());
                c.ma = Some(ma.clone());
                c.burn_in = Some(*burn_in);
                set_law(&mut c, innovation);
            }
        }
        c
    }
}
