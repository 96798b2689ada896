//! Closed-form joint law of eigenvalues and resonances, in log-space.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng_ensembles::{EnsembleParams, KappaDistribution};
use crate::spectra::{is_in_s, SpectrumConfiguration, MEMBERSHIP_TOL};

/// Threshold on `|1 - z_j²|` below which a configuration is rejected.
pub const SINGULAR_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub beta: f64,
    pub n: usize,
    pub gamma: f64,
    pub kappa_dist: KappaDistribution,
}

impl DensityParams {
    pub fn new(beta: f64, n: usize, gamma: f64, kappa_dist: KappaDistribution) -> Result<Self> {
        EnsembleParams::new(beta, n, gamma, kappa_dist)?;
        Ok(Self {
            beta,
            n,
            gamma,
            kappa_dist,
        })
    }
}

impl From<EnsembleParams> for DensityParams {
    fn from(p: EnsembleParams) -> Self {
        Self {
            beta: p.beta,
            n: p.n,
            gamma: p.gamma,
            kappa_dist: p.kappa_dist,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogDensityValue {
    /// `-inf` outside the support; may be `±inf` on the unit circle.
    pub log_value: f64,
    pub kappa_implied: Option<f64>,
    pub in_support: bool,
    /// Some point lies on the unit circle, where the modulus factor degenerates.
    pub on_unit_circle: bool,
}

impl LogDensityValue {
    fn outside(kappa_implied: Option<f64>, on_unit_circle: bool) -> Self {
        Self {
            log_value: f64::NEG_INFINITY,
            kappa_implied,
            in_support: false,
            on_unit_circle,
        }
    }
}

/// `log d_{2n,β}`, `log d_{2n-1,β}` and `log c_{n,β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalizationConstants {
    pub log_d_even: f64,
    pub log_d_odd: f64,
    pub log_c: f64,
}

fn log_gamma_product(beta: f64, n: usize) -> f64 {
    (1..n).map(|j| ln_gamma(beta * j as f64 / 2.0)).sum()
}

pub fn normalization_constants(params: &DensityParams) -> NormalizationConstants {
    let beta = params.beta;
    let nf = params.n as f64;
    let g2 = params.gamma * params.gamma;
    let power = nf / 2.0 + beta * nf * (nf - 1.0) / 4.0;
    let gammas = log_gamma_product(beta, params.n);
    let common = nf / 2.0 * PI.ln() + power * (2.0 * g2 / (beta * nf)).ln() + gammas;
    NormalizationConstants {
        log_d_even: common + (nf / 2.0 + 1.0) * LN_2 + beta * nf * nf / (2.0 * g2),
        log_d_odd: common + nf / 2.0 * LN_2 + beta * nf * (nf - 1.0) / (2.0 * g2),
        log_c: nf / 2.0 * PI.ln() - (nf / 2.0 - 1.0) * LN_2 + power * (2.0 / (beta * nf)).ln() + gammas,
    }
}

/// Combinatorial factor `1/(M! L!)` of the wedge measure over the full
/// `(x, y, r)` coordinate space.
pub fn wedge_factor(m_pairs: usize, l_reals: usize, count: usize) -> Result<f64> {
    if l_reals + 2 * m_pairs != count {
        return Err(Error::Shape(format!(
            "L + 2M = {} does not match point count {count}",
            l_reals + 2 * m_pairs
        )));
    }
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    Ok(1.0 / (fact(m_pairs) * fact(l_reals)))
}

/// Log of the factors shared by both laws, and whether a point sits on the
/// unit circle.
fn log_common(config: &SpectrumConfiguration, beta: f64, n: usize, gamma: f64) -> Result<(f64, bool)> {
    let z = config.points();
    let one = crate::Complex64::new(1.0, 0.0);
    if let Some(w) = z.iter().find(|w| (one - *w * *w).norm() < SINGULAR_TOL) {
        return Err(Error::Singular(format!("|1 - z^2| vanishes at z = {w}")));
    }
    let mut log_v = 0.0;
    let mut log_pair = 0.0;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            log_v += (z[j] - z[k]).norm().ln();
            log_pair += (one - z[j] * z[k].conj()).norm().ln();
        }
    }
    let mut log_mod = 0.0;
    let mut on_circle = false;
    for w in &z {
        let num = 1.0 - w.norm_sqr();
        on_circle |= num == 0.0;
        log_mod += num.abs().ln() - (one - w * w).norm().ln();
    }
    let gauss = -beta * n as f64 / (4.0 * gamma * gamma) * config.sum_squares();
    let mut total = log_v + gauss;
    // exponents vanish at β = 2; skip so that ln 0 never meets a zero weight
    if beta != 2.0 {
        total += (beta - 2.0) / 2.0 * log_pair + (beta - 2.0) / 4.0 * log_mod;
    }
    Ok((total, on_circle))
}

/// Joint log-density of the `2n` zeros when κ has a density.
pub fn log_density_random_kappa(config: &SpectrumConfiguration, params: &DensityParams) -> Result<LogDensityValue> {
    let n = params.n;
    if config.len() != 2 * n || config.origin_drops() != 0 {
        return Err(Error::Shape(format!("{} points, expected {}", config.len(), 2 * n)));
    }
    if !params.kappa_dist.has_density() {
        return Err(Error::Unsupported(format!(
            "kappa law {} has no density; use the kappa = 1 law",
            params.kappa_dist
        )));
    }
    let (common, on_circle) = log_common(config, params.beta, n, params.gamma)?;
    let prod = config.product();
    if prod >= 1.0 {
        return Ok(LogDensityValue::outside(None, on_circle));
    }
    let kappa = (1.0 - prod).sqrt();
    let f = params.kappa_dist.density_at(kappa).unwrap_or(0.0);
    if f <= 0.0 || !is_in_s(2 * n, config, MEMBERSHIP_TOL).member {
        return Ok(LogDensityValue::outside(Some(kappa), on_circle));
    }
    let bn = params.beta * n as f64;
    let log_value = common + bn * kappa * kappa / (2.0 * params.gamma * params.gamma) + f.ln()
        - (bn - 1.0) * kappa.ln()
        - normalization_constants(params).log_d_even;
    Ok(LogDensityValue {
        log_value,
        kappa_implied: Some(kappa),
        in_support: true,
        on_unit_circle: on_circle,
    })
}

/// Joint log-density of the `2n - 1` zeros when κ = 1.
pub fn log_density_kappa1(config: &SpectrumConfiguration, params: &DensityParams) -> Result<LogDensityValue> {
    let n = params.n;
    if config.len() != 2 * n - 1 || config.origin_drops() != 0 {
        return Err(Error::Shape(format!("{} points, expected {}", config.len(), 2 * n - 1)));
    }
    let (common, on_circle) = log_common(config, params.beta, n, params.gamma)?;
    if !is_in_s(2 * n - 1, config, MEMBERSHIP_TOL).member {
        return Ok(LogDensityValue::outside(Some(1.0), on_circle));
    }
    Ok(LogDensityValue {
        log_value: common - normalization_constants(params).log_d_odd,
        kappa_implied: Some(1.0),
        in_support: true,
        on_unit_circle: on_circle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;

    fn params(beta: f64, n: usize, gamma: f64, kd: KappaDistribution) -> DensityParams {
        DensityParams::new(beta, n, gamma, kd).unwrap()
    }

    const UNIF: KappaDistribution = KappaDistribution::Uniform { lo: 0.5, hi: 5.0 };

    #[test]
    fn constants_n1_beta2() {
        let c = normalization_constants(&params(2.0, 1, 1.0, UNIF));
        // √π · 2^{3/2} · e
        let d = PI.sqrt() * 2f64.powf(1.5) * 1f64.exp();
        assert!((c.log_d_even.exp() - d).abs() < 1e-12);
        assert!((c.log_d_even.exp() - 13.62736).abs() < 1e-4);
        assert!((c.log_c.exp() - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn odd_even_ratio() {
        for &(beta, n, gamma) in &[(1.0, 1, 1.0), (2.0, 3, 0.7), (4.0, 5, 2.0), (0.5, 40, 1.3)] {
            let c = normalization_constants(&params(beta, n, gamma, UNIF));
            let expect = -beta * n as f64 / (2.0 * gamma * gamma) - LN_2;
            assert!((c.log_d_odd - c.log_d_even - expect).abs() < 1e-9 * c.log_d_even.abs().max(1.0));
        }
    }

    #[test]
    fn constants_finite_at_large_n() {
        let c = normalization_constants(&params(4.0, 60, 1.0, UNIF));
        assert!(c.log_d_even.is_finite() && c.log_d_even.exp().is_infinite());
    }

    #[test]
    fn wedge_factors() {
        assert_eq!(wedge_factor(0, 2, 2).unwrap(), 0.5);
        assert!((wedge_factor(1, 0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((wedge_factor(2, 1, 5).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(wedge_factor(1, 1, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn straight_line_oracle_four_minus_two() {
        let cfg = SpectrumConfiguration::from_parts(vec![4.0, -2.0], vec![]).unwrap();
        let v = log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)).unwrap();
        assert!(v.in_support);
        assert!((v.kappa_implied.unwrap() - 3.0).abs() < 1e-15);
        let d22 = PI.sqrt() * 2f64.powf(1.5) * 1f64.exp();
        let vandermonde = 6.0;
        let gauss = (-0.5f64 * (16.0 + 4.0)).exp();
        let kappa_block = (9.0f64).exp() * (1.0 / 4.5) / 3.0;
        let expect = vandermonde * gauss * kappa_block / d22;
        assert!((v.log_value - expect.ln()).abs() < 1e-12, "{} vs {}", v.log_value, expect.ln());
    }

    #[test]
    fn straight_line_oracle_beta1_pair() {
        // β = 1, n = 1, γ = 1, pair z = 0.3 ± 0.4i, κ² = 1 - 0.25
        let z = Complex64::new(0.3, 0.4);
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![z]).unwrap();
        let kd = KappaDistribution::Chi { k: 3.0, scale: 0.5 };
        let v = log_density_random_kappa(&cfg, &params(1.0, 1, 1.0, kd)).unwrap();
        let zb = z.conj();
        let one = Complex64::new(1.0, 0.0);
        let kappa = 0.75f64.sqrt();
        let mut val = (z - zb).norm() * (one - z * zb.conj()).norm().powf(-0.5);
        for w in [z, zb] {
            val *= ((1.0 - w.norm_sqr()) / (one - w * w).norm()).powf(-0.25);
        }
        val *= (-(z * z + zb * zb).re / 4.0).exp();
        val *= (kappa * kappa / 2.0).exp() * kd.density_at(kappa).unwrap() / kappa.powf(0.0);
        // d_{2,1} = √π 2^{3/2} e^{1/2} 2^{1/2}
        let d = PI.sqrt() * 2f64.powf(1.5) * 0.5f64.exp() * 2f64.sqrt();
        assert!((v.log_value - (val / d).ln()).abs() < 1e-12);
        assert!((v.kappa_implied.unwrap() - kappa).abs() < 1e-15);
    }

    #[test]
    fn outside_support_cases() {
        // Π z = 1.5 ≥ 1
        let cfg = SpectrumConfiguration::from_parts(vec![1.5, 1.0 + 1e-3], vec![]).unwrap();
        let v = log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)).unwrap();
        assert!(!v.in_support && v.log_value == f64::NEG_INFINITY && v.kappa_implied.is_none());
        // Π z = 0.75 → κ = 0.5, F(0.5) > 0
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![Complex64::new(0.0, 0.75f64.sqrt())]).unwrap();
        let v = log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)).unwrap();
        assert!((v.kappa_implied.unwrap() - 0.5).abs() < 1e-15);
        // κ = 0.2 outside uniform(0.5, 5)
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![Complex64::new(0.0, 0.96f64.sqrt())]).unwrap();
        let v = log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)).unwrap();
        assert!(!v.in_support && v.log_value == f64::NEG_INFINITY);
        // two real points inside the disk on the same side break the parity clause
        let cfg = SpectrumConfiguration::from_parts(vec![0.5, 3.0], vec![]).unwrap();
        let m = is_in_s(2, &cfg, MEMBERSHIP_TOL);
        let v = log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)).unwrap();
        assert_eq!(v.in_support, m.member);
        if !m.member {
            assert_eq!(v.log_value, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn shape_and_singular_errors() {
        let cfg = SpectrumConfiguration::from_parts(vec![4.0], vec![]).unwrap();
        assert!(matches!(log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)), Err(Error::Shape(_))));
        let cfg2 = SpectrumConfiguration::from_parts(vec![4.0, -2.0], vec![]).unwrap();
        assert!(matches!(log_density_kappa1(&cfg2, &params(2.0, 1, 1.0, UNIF)), Err(Error::Shape(_))));
        let cfg = SpectrumConfiguration::from_parts(vec![1.0, -2.0], vec![]).unwrap();
        assert!(matches!(log_density_random_kappa(&cfg, &params(2.0, 1, 1.0, UNIF)), Err(Error::Singular(_))));
        let pt = KappaDistribution::Point { value: 1.0 };
        assert!(matches!(log_density_random_kappa(&cfg2, &params(2.0, 1, 1.0, pt)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn kappa1_single_point() {
        let cfg = SpectrumConfiguration::from_parts(vec![0.5], vec![]).unwrap();
        let p = params(2.0, 1, 1.0, KappaDistribution::Point { value: 1.0 });
        let v = log_density_kappa1(&cfg, &p).unwrap();
        let c = normalization_constants(&p);
        assert!(v.in_support);
        assert!((v.log_value - (-0.5 * 0.25 - c.log_d_odd)).abs() < 1e-14);
    }

    #[test]
    fn unit_circle_flagged() {
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![Complex64::new(0.6, 0.8)]).unwrap();
        let v = log_density_random_kappa(&cfg, &params(1.0, 1, 1.0, KappaDistribution::Chi { k: 3.0, scale: 0.5 }));
        // Π z = 1 lies outside the support regardless
        let v = v.unwrap();
        assert!(v.on_unit_circle && !v.in_support);
    }

    #[test]
    fn conjugation_and_permutation_invariance() {
        let p = params(1.0, 2, 1.0, KappaDistribution::Chi { k: 3.0, scale: 0.5 });
        let a = SpectrumConfiguration::from_parts(vec![2.5, -0.4], vec![Complex64::new(0.1, 0.5)]).unwrap();
        let b = SpectrumConfiguration::from_parts(vec![-0.4, 2.5], vec![Complex64::new(0.1, -0.5)]).unwrap();
        let va = log_density_random_kappa(&a, &p).unwrap();
        let vb = log_density_random_kappa(&b, &p).unwrap();
        let vc = log_density_random_kappa(&a.conjugate(), &p).unwrap();
        assert_eq!(va.log_value.to_bits(), vb.log_value.to_bits());
        assert_eq!(va.log_value.to_bits(), vc.log_value.to_bits());
    }
}
