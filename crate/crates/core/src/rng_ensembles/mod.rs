//! Seeded sampling: scalar laws, the κ family, dense Gaussian ensembles and the
//! tridiagonal beta model.

mod householder;
mod stream;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

pub use householder::{householder_tridiagonalize, HermitianMatrix};
pub use stream::RandomStream;

/// Law of the lead coupling κ. Closed family so the density can be evaluated
/// exactly by the density model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KappaDistribution {
    /// `scale · χ_k`, density ∝ x^{k-1} e^{-x²/(2 scale²)}.
    Chi { k: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Point { value: f64 },
}

impl KappaDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Chi { k, scale } => k.is_finite() && scale.is_finite() && k > 0.0 && scale > 0.0,
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo,
            Self::Point { value } => value.is_finite() && value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid kappa distribution {self}")))
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, Self::Point { .. })
    }

    /// Density at `kappa`; `None` for the degenerate point law.
    pub fn density_at(&self, kappa: f64) -> Option<f64> {
        match *self {
            Self::Chi { k, scale } => {
                if kappa <= 0.0 {
                    return Some(0.0);
                }
                let x = kappa / scale;
                let log_f = (k - 1.0) * x.ln() - 0.5 * x * x
                    - (0.5 * k - 1.0) * std::f64::consts::LN_2
                    - ln_gamma(0.5 * k)
                    - scale.ln();
                Some(log_f.exp())
            }
            Self::Uniform { lo, hi } => Some(if (lo..=hi).contains(&kappa) {
                1.0 / (hi - lo)
            } else {
                0.0
            }),
            Self::Point { .. } => None,
        }
    }

    pub fn cdf(&self, kappa: f64) -> f64 {
        match *self {
            Self::Chi { k, scale } => {
                if kappa <= 0.0 {
                    0.0
                } else {
                    let x = kappa / scale;
                    gamma_lr(0.5 * k, 0.5 * x * x)
                }
            }
            Self::Uniform { lo, hi } => ((kappa - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Point { value } => {
                if kappa >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Chi { k, scale } => {
                scale * std::f64::consts::SQRT_2 * (ln_gamma(0.5 * (k + 1.0)) - ln_gamma(0.5 * k)).exp()
            }
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Point { value } => value,
        }
    }
}

impl fmt::Display for KappaDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Chi { k, scale } => write!(f, "chi:{k}:{scale}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            Self::Point { value } => write!(f, "point:{value}"),
        }
    }
}

/// Grammar: `point:v`, `uniform:lo:hi`, `chi:k:scale`.
impl FromStr for KappaDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("bad number {t:?} in kappa spec {s:?}")))
        };
        let dist = match parts.as_slice() {
            ["point", v] => Self::Point { value: num(v)? },
            ["uniform", lo, hi] => Self::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            ["chi", k, scale] => Self::Chi {
                k: num(k)?,
                scale: num(scale)?,
            },
            _ => {
                return Err(Error::Parameter(format!(
                    "kappa spec {s:?} does not match point:v | uniform:lo:hi | chi:k:scale"
                )))
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Parameters of the coupled ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub beta: f64,
    pub n: usize,
    pub gamma: f64,
    pub kappa_dist: KappaDistribution,
}

impl EnsembleParams {
    pub fn new(beta: f64, n: usize, gamma: f64, kappa_dist: KappaDistribution) -> Result<Self> {
        let p = Self {
            beta,
            n,
            gamma,
            kappa_dist,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        if self.n == 0 {
            return Err(Error::Parameter("matrix size n must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma != 0.0) {
            return Err(Error::Parameter(format!("gamma must be nonzero, got {}", self.gamma)));
        }
        self.kappa_dist.validate()
    }
}

/// Symmetric tridiagonal matrix with diagonal `s` and off-diagonal `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalSample {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl TridiagonalSample {
    pub fn n(&self) -> usize {
        self.s.len()
    }
}

pub fn normal_sample(stream: &mut RandomStream, mean: f64, variance: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::Parameter(format!("variance must be positive, got {variance}")));
    }
    let z: f64 = stream.sample(StandardNormal);
    Ok(mean + variance.sqrt() * z)
}

/// Gamma(shape, 1).
pub fn gamma_sample(stream: &mut RandomStream, shape: f64) -> Result<f64> {
    let bad = || Error::Parameter(format!("gamma shape must be positive and finite, got {shape}"));
    if !shape.is_finite() {
        return Err(bad());
    }
    let law = Gamma::new(shape, 1.0).map_err(|_| bad())?;
    Ok(stream.sample(law))
}

/// `scale · χ_dof` with real degrees of freedom, via `√(2·Gamma(dof/2))`.
pub fn chi_sample(stream: &mut RandomStream, dof: f64, scale: f64) -> Result<f64> {
    if !(dof.is_finite() && dof > 0.0) {
        return Err(Error::Parameter(format!("chi degrees of freedom must be positive, got {dof}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Parameter(format!("chi scale must be positive, got {scale}")));
    }
    loop {
        let g = gamma_sample(stream, 0.5 * dof)?;
        // tiny shapes can underflow to zero; the law has no atom there
        if g > 0.0 {
            return Ok(scale * (2.0 * g).sqrt());
        }
    }
}

/// Tridiagonal beta model: `s_j ~ N(0, 2/(βn))`, `t_j ~ χ_{β(n-j)}/√(βn)`.
pub fn sample_de_tridiagonal(params: &EnsembleParams, stream: &mut RandomStream) -> Result<TridiagonalSample> {
    params.validate()?;
    let n = params.n;
    let bn = params.beta * n as f64;
    let s = (0..n)
        .map(|_| normal_sample(stream, 0.0, 2.0 / bn))
        .collect::<Result<Vec<_>>>()?;
    let t = (1..n)
        .map(|j| chi_sample(stream, params.beta * (n - j) as f64, 1.0 / bn.sqrt()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TridiagonalSample { s, t })
}

/// Dense GOE (β=1) or GUE (β=2) draw, `X = ½(Y+Y*)·√2/√(βn)`.
pub fn sample_dense_gaussian(beta: f64, n: usize, stream: &mut RandomStream) -> Result<HermitianMatrix> {
    if beta == 4.0 {
        return Err(Error::Unsupported("dense quaternionic (beta = 4) ensemble".into()));
    }
    if beta != 1.0 && beta != 2.0 {
        return Err(Error::Parameter(format!("dense ensembles need beta in {{1, 2}}, got {beta}")));
    }
    if n == 0 {
        return Err(Error::Parameter("matrix size n must be at least 1".into()));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for entry in y.iter_mut() {
        let re: f64 = stream.sample(StandardNormal);
        let im: f64 = if beta == 2.0 { stream.sample(StandardNormal) } else { 0.0 };
        *entry = Complex64::new(re, im);
    }
    let scale = std::f64::consts::SQRT_2 / (beta * n as f64).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = 0.5 * (y[i * n + j] + y[j * n + i].conj()) * scale;
        }
    }
    HermitianMatrix::new(n, data)
}

pub fn sample_kappa(dist: &KappaDistribution, stream: &mut RandomStream) -> Result<f64> {
    dist.validate()?;
    match *dist {
        KappaDistribution::Chi { k, scale } => chi_sample(stream, k, scale),
        KappaDistribution::Uniform { lo, hi } => Ok(lo + (hi - lo) * stream.uniform_open()),
        KappaDistribution::Point { value } => Ok(value),
    }
}
