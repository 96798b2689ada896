//! The `n = 1` joint law: bin integrals by tensor Gauss–Legendre quadrature,
//! closed-form one-dimensional checks, and the Monte Carlo comparison.
//!
//! With one matrix entry the two zeros are either a real pair `r_1 < r_2` or a
//! conjugate pair `x ± iy` inside the unit disk. Over the half-spaces used here
//! the wedge measure contributes weight 1 (real pair, ordered) and 2 (pair,
//! `y > 0`).

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use super::{channel, normal_cdf, sample_trial, with_workers, ExperimentReport, Sampler, ALPHA};
use crate::density_model::{log_density_random_kappa, wedge_factor, DensityParams};
use crate::error::{Error, Result};
use crate::rng_ensembles::{EnsembleParams, KappaDistribution, RandomStream};
use crate::spectra::SpectrumConfiguration;

pub const TOL_NORMALIZATION: f64 = 0.01;
pub const TOL_TAIL: f64 = 1e-4;
pub const TOL_BIN_DEVIATION: f64 = 0.10;
pub const MIN_EXPECTED_COUNT: f64 = 100.0;
pub const MIN_MC_TRIALS: u64 = 100_000;

/// Quadrature layout: `bins × bins` cells per region, each split into
/// `sub × sub` panels of `order`-point Gauss–Legendre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct N1Quadrature {
    pub bins: usize,
    pub radius: f64,
    pub sub: usize,
    pub order: usize,
}

impl Default for N1Quadrature {
    fn default() -> Self {
        Self {
            bins: 20,
            radius: 6.0,
            sub: 4,
            order: 8,
        }
    }
}

impl N1Quadrature {
    fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.sub == 0 || self.order == 0 || !(self.radius > 1.0) {
            return Err(Error::Parameter(format!("invalid quadrature layout {self:?}")));
        }
        Ok(())
    }

    fn real_edges(&self, i: usize) -> (f64, f64) {
        let w = 2.0 * self.radius / self.bins as f64;
        (-self.radius + i as f64 * w, -self.radius + (i + 1) as f64 * w)
    }

    fn real_bin(&self, r: f64) -> Option<usize> {
        let i = ((r + self.radius) / (2.0 * self.radius) * self.bins as f64).floor();
        (0.0..self.bins as f64).contains(&i).then_some(i as usize)
    }

    fn x_edges(&self, i: usize) -> (f64, f64) {
        let w = 2.0 / self.bins as f64;
        (-1.0 + i as f64 * w, -1.0 + (i + 1) as f64 * w)
    }

    fn y_edges(&self, j: usize) -> (f64, f64) {
        let w = 1.0 / self.bins as f64;
        (j as f64 * w, (j + 1) as f64 * w)
    }

    fn complex_bin(&self, z: Complex64) -> Option<(usize, usize)> {
        let i = ((z.re + 1.0) / 2.0 * self.bins as f64).floor();
        let j = (z.im * self.bins as f64).floor();
        let b = self.bins as f64;
        ((0.0..b).contains(&i) && (0.0..b).contains(&j)).then_some((i as usize, j as usize))
    }
}

fn n1_params(beta: f64, gamma: f64, kappa_dist: KappaDistribution) -> Result<DensityParams> {
    let p = DensityParams::new(beta, 1, gamma, kappa_dist)?;
    if !kappa_dist.has_density() {
        return Err(Error::Parameter(format!("kappa law {kappa_dist} has no density")));
    }
    Ok(p)
}

fn density_or_zero(cfg: Result<SpectrumConfiguration>, params: &DensityParams) -> f64 {
    cfg.and_then(|c| log_density_random_kappa(&c, params))
        .map(|v| if v.in_support { v.log_value.exp() } else { 0.0 })
        .unwrap_or(0.0)
}

/// Density of an ordered real pair, wedge weight included.
pub fn real_pair_density(r1: f64, r2: f64, params: &DensityParams) -> f64 {
    if r1 >= r2 {
        return 0.0;
    }
    // 2! orderings of the pair collapse onto r1 < r2
    let w = 2.0 * wedge_factor(0, 2, 2).expect("consistent counts");
    w * density_or_zero(SpectrumConfiguration::from_parts(vec![r1, r2], vec![]), params)
}

/// Density of a conjugate pair at `x ± iy`, `y > 0`, wedge weight included.
pub fn complex_pair_density(x: f64, y: f64, params: &DensityParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    // the two half-planes collapse onto y > 0
    let w = 2.0 * wedge_factor(1, 0, 2).expect("consistent counts");
    w * density_or_zero(SpectrumConfiguration::from_parts(vec![], vec![Complex64::new(x, y)]), params)
}

fn cell_integral(rule: &GaussLegendre, (x0, x1): (f64, f64), (y0, y1): (f64, f64), sub: usize, f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let hx = (x1 - x0) / sub as f64;
    let hy = (y1 - y0) / sub as f64;
    let mut total = 0.0;
    for p in 0..sub {
        let (a, b) = (x0 + p as f64 * hx, x0 + (p + 1) as f64 * hx);
        for q in 0..sub {
            let (c, d) = (y0 + q as f64 * hy, y0 + (q + 1) as f64 * hy);
            total += rule.integrate(a, b, |x| rule.integrate(c, d, |y| f(x, y)));
        }
    }
    total
}

/// Probability mass per bin: real pairs indexed `[i * bins + j]` with `r_1`
/// in bin `i` and `r_2` in bin `j`; conjugate pairs indexed by `(x, y)` bins.
#[derive(Clone, Debug, Serialize)]
pub struct BinMasses {
    pub real: Vec<f64>,
    pub complex: Vec<f64>,
}

impl BinMasses {
    pub fn real_total(&self) -> f64 {
        self.real.iter().sum()
    }

    pub fn complex_total(&self) -> f64 {
        self.complex.iter().sum()
    }
}

pub fn bin_masses(params: &DensityParams, quad: &N1Quadrature) -> Result<BinMasses> {
    quad.validate()?;
    let rule = GaussLegendre::new(NonZeroUsize::new(quad.order).expect("validated"));
    let b = quad.bins;
    let real = (0..b * b)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / b, idx % b);
            if i > j {
                return 0.0;
            }
            cell_integral(&rule, quad.real_edges(i), quad.real_edges(j), quad.sub, &|x, y| {
                real_pair_density(x, y, params)
            })
        })
        .collect();
    let complex = (0..b * b)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / b, idx % b);
            cell_integral(&rule, quad.x_edges(i), quad.y_edges(j), quad.sub, &|x, y| {
                complex_pair_density(x, y, params)
            })
        })
        .collect();
    Ok(BinMasses { real, complex })
}

/// `E_κ[g(κ)]` under the κ law, by panel Gauss–Legendre with a break at κ = 1.
fn kappa_expectation(dist: &KappaDistribution, g: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = match *dist {
        KappaDistribution::Chi { k, scale } => (0.0, scale * (k.sqrt() + 12.0)),
        KappaDistribution::Uniform { lo, hi } => (lo, hi),
        KappaDistribution::Point { value } => return g(value),
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(32).expect("nonzero"));
    let mut breaks = vec![lo];
    if lo < 1.0 && 1.0 < hi {
        breaks.push(1.0);
    }
    breaks.push(hi);
    let panels = 64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let (a, b) = (w[0] + p as f64 * h, w[0] + (p + 1) as f64 * h);
            total += rule.integrate(a, b, |k| dist.density_at(k).unwrap_or(0.0) * g(k));
        }
    }
    total
}

/// `P(|b| > c)` for `b ~ N(0, σ²)`.
fn two_sided_tail(c: f64, sigma: f64) -> f64 {
    erfc(c.max(0.0) / (sigma * std::f64::consts::SQRT_2))
}

/// Probability that both zeros are real: the discriminant of
/// `z² - b z + 1 - κ²` is `b² - 4(1 - κ²)`, with `b ~ N(0, 2γ²/β)`.
pub fn real_fraction_analytic(beta: f64, gamma: f64, dist: &KappaDistribution) -> f64 {
    let sigma = (2.0 * gamma * gamma / beta).sqrt();
    kappa_expectation(dist, |k| {
        if k >= 1.0 {
            1.0
        } else {
            two_sided_tail(2.0 * (1.0 - k * k).sqrt(), sigma)
        }
    })
}

/// Probability that the larger zero exceeds `radius` in modulus:
/// `|b| > R + (1 - κ²)/R`. Conjugate pairs stay inside the unit disk.
pub fn tail_mass_analytic(beta: f64, gamma: f64, dist: &KappaDistribution, radius: f64) -> f64 {
    let sigma = (2.0 * gamma * gamma / beta).sqrt();
    kappa_expectation(dist, |k| two_sided_tail(radius + (1.0 - k * k) / radius, sigma))
}

/// Total quadrature mass of the `n = 1` law.
pub fn normalization_n1(
    beta: f64,
    gamma: f64,
    kappa_dist: KappaDistribution,
    quad: &N1Quadrature,
    workers: usize,
) -> Result<ExperimentReport> {
    let params = n1_params(beta, gamma, kappa_dist)?;
    let masses = with_workers(workers, || bin_masses(&params, quad))??;
    let tail = tail_mass_analytic(beta, gamma, &kappa_dist, quad.radius);
    let inside = masses.real_total() + masses.complex_total();
    let real_analytic = real_fraction_analytic(beta, gamma, &kappa_dist);
    let mut r = ExperimentReport::new("normalization_n1", 0, 0);
    r.param("beta", beta)
        .param("n", 1)
        .param("gamma", gamma)
        .param("kappa", kappa_dist.to_string())
        .param("quadrature", quad);
    r.stat("mass_inside", inside)
        .stat("real_pair_mass", masses.real_total())
        .stat("complex_pair_mass", masses.complex_total())
        .stat("total", inside + tail)
        .stat("real_fraction_analytic", real_analytic)
        .stat("real_fraction_quadrature", masses.real_total() + tail)
        .below("normalization_error", (inside + tail - 1.0).abs(), TOL_NORMALIZATION)
        .below("tail_mass", tail, TOL_TAIL);
    Ok(r)
}

enum Cell {
    Real(usize),
    Complex(usize),
    Outside,
    Other,
}

fn locate(cfg: &SpectrumConfiguration, quad: &N1Quadrature) -> Cell {
    let b = quad.bins;
    if cfg.real_count() == 2 {
        let (r1, r2) = (cfg.reals()[0], cfg.reals()[1]);
        match (quad.real_bin(r1), quad.real_bin(r2)) {
            (Some(i), Some(j)) => Cell::Real(i * b + j),
            _ => Cell::Outside,
        }
    } else if cfg.pair_count() == 1 {
        match quad.complex_bin(cfg.pairs()[0]) {
            Some((i, j)) => Cell::Complex(i * b + j),
            None => Cell::Outside,
        }
    } else {
        Cell::Other
    }
}

/// Binned Monte Carlo frequencies of the `n = 1` pipeline against the
/// quadrature of the closed-form law.
pub fn density_mc_compare_n1(
    beta: f64,
    gamma: f64,
    kappa_dist: KappaDistribution,
    trials: u64,
    quad: &N1Quadrature,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::Parameter(format!(
            "mc-compare needs at least {MIN_MC_TRIALS} trials for bins with {MIN_EXPECTED_COUNT} expected counts, got {trials}"
        )));
    }
    let params = n1_params(beta, gamma, kappa_dist)?;
    let ens = EnsembleParams::new(beta, 1, gamma, kappa_dist)?;
    let b = quad.bins;
    let (masses, cells) = with_workers(workers, || -> Result<_> {
        let masses = bin_masses(&params, quad)?;
        let cells: Vec<Cell> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut st = RandomStream::for_trial(seed, channel::SAMPLE, trial);
                match sample_trial(&ens, Sampler::Tridiagonal, &mut st) {
                    Ok(s) => locate(&s.config, quad),
                    Err(_) => Cell::Other,
                }
            })
            .collect();
        Ok((masses, cells))
    })??;

    let mut real_counts = vec![0u64; b * b];
    let mut complex_counts = vec![0u64; b * b];
    let (mut outside, mut other, mut n_real) = (0u64, 0u64, 0u64);
    for c in &cells {
        match c {
            Cell::Real(i) => {
                real_counts[*i] += 1;
                n_real += 1;
            }
            Cell::Complex(i) => complex_counts[*i] += 1,
            Cell::Outside => {
                outside += 1;
                n_real += 1;
            }
            Cell::Other => other += 1,
        }
    }
    let nt = trials as f64;
    let counted: u64 = real_counts.iter().sum::<u64>() + complex_counts.iter().sum::<u64>() + outside + other;

    let mut max_dev = 0f64;
    let mut worst = String::new();
    let (mut chi2, mut compared) = (0f64, 0usize);
    let mut no_alarm = 1f64;
    let pairs = real_counts
        .iter()
        .zip(&masses.real)
        .map(|(o, m)| ("real", o, m))
        .chain(complex_counts.iter().zip(&masses.complex).map(|(o, m)| ("complex", o, m)));
    for (idx, (region, &obs, &mass)) in pairs.enumerate() {
        let expected = nt * mass;
        if expected < MIN_EXPECTED_COUNT {
            continue;
        }
        compared += 1;
        let dev = (obs as f64 - expected).abs() / expected;
        if dev > max_dev {
            max_dev = dev;
            let cell = idx % (b * b);
            worst = format!("{region} bin ({}, {}): observed {obs}, expected {expected:.1}", cell / b, cell % b);
        }
        chi2 += (obs as f64 - expected).powi(2) / expected;
        // P(|O - E| <= 0.1 E) under the normal approximation
        let z = TOL_BIN_DEVIATION * expected.sqrt();
        no_alarm *= 2.0 * normal_cdf(z) - 1.0;
    }
    let chi2_p = if compared > 0 {
        ChiSquared::new(compared as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };

    let tail = tail_mass_analytic(beta, gamma, &kappa_dist, quad.radius);
    let p_real = masses.real_total() + tail;
    let emp_real = n_real as f64 / nt;
    let z_split = (emp_real - p_real).abs() / (p_real * (1.0 - p_real) / nt).sqrt();

    let mut r = ExperimentReport::new("density_mc_compare_n1", seed, trials as usize);
    r.param("beta", beta)
        .param("n", 1)
        .param("gamma", gamma)
        .param("kappa", kappa_dist.to_string())
        .param("quadrature", quad)
        .param("min_expected_count", MIN_EXPECTED_COUNT);
    r.stat("bins_compared", compared as f64)
        .stat("chi_square", chi2)
        .stat("chi_square_p_value", chi2_p)
        .stat("false_alarm_probability", 1.0 - no_alarm)
        .stat("real_fraction_empirical", emp_real)
        .stat("real_fraction_quadrature", p_real)
        .stat("real_fraction_analytic", real_fraction_analytic(beta, gamma, &kappa_dist))
        .stat("outside_domain", outside as f64)
        .stat("unbinned", other as f64)
        .stat("total_empirical_mass", counted as f64 / nt)
        .below("max_relative_bin_deviation", max_dev, TOL_BIN_DEVIATION)
        .below("real_fraction_z_score", z_split, 3.0)
        .verdict("total_empirical_mass", 0.0, counted == trials);
    if !worst.is_empty() {
        r.note(format!("largest deviation: {worst}"));
    }
    r.note(format!(
        "chi-square over compared bins at significance {ALPHA}: {}",
        if chi2_p > ALPHA { "consistent" } else { "rejected" }
    ));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHI: KappaDistribution = KappaDistribution::Chi { k: 3.0, scale: 0.5 };

    #[test]
    fn real_fraction_limits() {
        // κ ≥ 1 always gives real zeros
        let f = real_fraction_analytic(2.0, 1.0, &KappaDistribution::Uniform { lo: 1.0, hi: 2.0 });
        assert!((f - 1.0).abs() < 1e-12);
        let f = real_fraction_analytic(2.0, 1.0, &KappaDistribution::Point { value: 0.0f64.max(1e-9) });
        // b² ≥ 4 with b ~ N(0, 1)
        assert!((f - erfc(2.0 / std::f64::consts::SQRT_2)).abs() < 1e-8);
        let f = real_fraction_analytic(1.0, 1.0, &CHI);
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn tail_is_small_at_radius_six() {
        for beta in [1.0, 2.0] {
            assert!(tail_mass_analytic(beta, 1.0, &CHI, 6.0) < 1e-4);
        }
    }

    #[test]
    fn bins_locate_points() {
        let q = N1Quadrature::default();
        assert_eq!(q.real_bin(-6.0), Some(0));
        assert_eq!(q.real_bin(5.999), Some(19));
        assert_eq!(q.real_bin(6.0), None);
        assert_eq!(q.complex_bin(Complex64::new(0.0, 0.99)), Some((10, 19)));
    }

    #[test]
    fn mc_compare_refuses_small_runs() {
        let q = N1Quadrature::default();
        assert!(matches!(
            density_mc_compare_n1(2.0, 1.0, CHI, 99_999, &q, 1, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn normalization_coarse() {
        let q = N1Quadrature {
            sub: 2,
            ..Default::default()
        };
        let r = normalization_n1(2.0, 1.0, CHI, &q, 0).unwrap();
        assert!(r.passed, "{}", r.to_json());
    }
}
