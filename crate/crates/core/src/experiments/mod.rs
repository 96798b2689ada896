//! Monte Carlo runs and verification suites.
//!
//! Every trial draws from its own substream `(seed, channel, trial)`, results
//! are collected in trial order and reduced on one thread, so reports do not
//! depend on the worker count.

pub mod density_n1;
pub mod ks;
mod report;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gc_engine::{gc_forward, gc_inverse};
use crate::identities_checks::{
    check_lemma_identities, lemma_v_convention, min_pair_factor, stepwise_jacobian_fd, total_jacobian_fd, DEFAULT_FD_STEP,
    TOL_JACOBIAN, TOL_LEMMA_I_IV, TOL_LEMMA_V,
};
use crate::operator_model::{assemble_coupled, tridiag_eigenvalues, truncate, JacobiCoefficients, TruncatedOperator};
use crate::rng_ensembles::{
    householder_tridiagonalize, sample_de_tridiagonal, sample_dense_gaussian, sample_kappa, EnsembleParams,
    KappaDistribution, RandomStream, TridiagonalSample,
};
use crate::spectra::{
    canonicalize_conjugates, classify, is_in_s, joukowsky, polynomial_roots, PointLabel, SpectrumConfiguration,
    MEMBERSHIP_TOL, REAL_SNAP_TOL,
};

pub use density_n1::{density_mc_compare_n1, normalization_n1, N1Quadrature};
pub use ks::{ks_test, ks_two_sample, normal_cdf, KsResult};
pub use report::ExperimentReport;

/// Substream channels, one per experiment family.
pub mod channel {
    pub const SAMPLE: u16 = 1;
    pub const ROUNDTRIP: u16 = 2;
    pub const IDENTITIES: u16 = 3;
    pub const JACOBIAN: u16 = 4;
    pub const EIGEN: u16 = 5;
    pub const DENSE: u16 = 6;
    pub const TRIDIAGONAL: u16 = 7;
    pub const SEMICIRCLE: u16 = 8;
    pub const MEMBERSHIP: u16 = 9;
    /// Added to a channel for the single permitted statistical retry.
    pub const RETRY: u16 = 0x100;
}

/// Significance level of the statistical suites.
pub const ALPHA: f64 = 0.01;
/// Largest tolerated fraction of numerically failed trials.
pub const MAX_FAILURE_RATE: f64 = 1e-3;
pub const TOL_ROUNDTRIP: f64 = 1e-8;
pub const TOL_KAPPA_IDENTITY: f64 = 1e-9;
pub const TOL_EIGEN_MATCH: f64 = 1e-6;
/// Zeros with `|z|` above this are matched against the truncated operator.
pub const EIGEN_MODULUS_CUTOFF: f64 = 1.001;
/// Truncated eigenvalues outside `[-2 - margin, 2 + margin]` need a zero.
pub const EIGEN_BAND_MARGIN: f64 = 0.01;
/// Draws where some `|1 - z_j z̄_k|` (which includes `|1 - z_j²|` and
/// `1 - |z_j|²`) is at or below this are redrawn in the identity suite.
pub const GENERIC_UNIT_GAP: f64 = 1e-3;
/// Draws with two zeros of some `L*_m` closer than this are redrawn in the Jacobian suite.
pub const CLUSTER_RADIUS: f64 = 1e-3;
const MAX_REDRAWS: usize = 1000;

/// Run `f` on a pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// How the Gaussian matrix is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Tridiagonal beta model, any β > 0.
    #[default]
    Tridiagonal,
    /// Dense GOE/GUE followed by Householder reduction, β ∈ {1, 2}.
    Dense,
}

/// One pass of the pipeline: matrix, κ, coupled coefficients, zeros.
#[derive(Clone, Debug)]
pub struct TrialSample {
    pub tridiag: TridiagonalSample,
    pub kappa: f64,
    pub coeffs: JacobiCoefficients,
    pub roots: Vec<Complex64>,
    pub config: SpectrumConfiguration,
}

impl TrialSample {
    /// `|κ - √(1 - Π z_j)|`, infinite when `Π z_j ≥ 1`.
    pub fn kappa_residual(&self) -> f64 {
        let p = self.config.product();
        if p >= 1.0 {
            f64::INFINITY
        } else {
            (self.kappa - (1.0 - p).sqrt()).abs()
        }
    }

    /// Expected point count: `2n`, or `2n - 1` when κ = 1 puts a zero at the origin.
    pub fn expected_points(&self) -> usize {
        2 * self.coeffs.n() - usize::from(self.kappa == 1.0)
    }
}

pub fn sample_trial(params: &EnsembleParams, sampler: Sampler, stream: &mut RandomStream) -> Result<TrialSample> {
    let tridiag = match sampler {
        Sampler::Tridiagonal => sample_de_tridiagonal(params, stream)?,
        Sampler::Dense => householder_tridiagonalize(&sample_dense_gaussian(params.beta, params.n, stream)?)?,
    };
    let kappa = sample_kappa(&params.kappa_dist, stream)?;
    let coeffs = assemble_coupled(&tridiag, params.gamma, kappa)?;
    let seq = gc_forward(&coeffs)?;
    let roots = polynomial_roots(seq.last_lstar())?;
    let config = canonicalize_conjugates(&roots, REAL_SNAP_TOL)?;
    Ok(TrialSample {
        tridiag,
        kappa,
        coeffs,
        roots,
        config,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroRecord {
    pub re: f64,
    pub im: f64,
    pub label: PointLabel,
}

/// One line of the sampling stream.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub kappa: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub zeros: Vec<ZeroRecord>,
    #[serde(rename = "in_S")]
    pub in_s: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_violation: Option<String>,
    pub kappa_check_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    fn from_sample(trial: u64, smp: &TrialSample) -> Self {
        let m = is_in_s(smp.expected_points(), &smp.config, MEMBERSHIP_TOL);
        Self {
            trial,
            s: smp.tridiag.s.clone(),
            t: smp.tridiag.t.clone(),
            kappa: smp.kappa,
            a: smp.coeffs.a.clone(),
            b: smp.coeffs.b.clone(),
            zeros: classify(&smp.config)
                .into_iter()
                .map(|p| ZeroRecord {
                    re: p.z.re,
                    im: p.z.im,
                    label: p.label,
                })
                .collect(),
            in_s: m.member,
            membership_violation: m.violated.map(|c| format!("{c:?}: {}", m.detail)),
            kappa_check_residual: smp.kappa_residual(),
            error: None,
        }
    }

    fn failed(trial: u64, err: &Error) -> Self {
        Self {
            trial,
            s: vec![],
            t: vec![],
            kappa: f64::NAN,
            a: vec![],
            b: vec![],
            zeros: vec![],
            in_s: false,
            membership_violation: None,
            kappa_check_residual: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

/// Sampling records for trials `range`, in order.
pub fn sample_records(
    params: &EnsembleParams,
    sampler: Sampler,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Vec<TrialRecord> {
    range
        .into_par_iter()
        .map(|trial| {
            let mut st = RandomStream::for_trial(seed, channel::SAMPLE, trial);
            match sample_trial(params, sampler, &mut st) {
                Ok(smp) => TrialRecord::from_sample(trial, &smp),
                Err(e) => TrialRecord::failed(trial, &e),
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplingRun {
    pub records: Vec<TrialRecord>,
    pub failures: usize,
    pub failure_rate: f64,
}

impl SamplingRun {
    pub fn acceptable(&self) -> bool {
        self.failure_rate <= MAX_FAILURE_RATE
    }
}

/// Full pipeline over `trials` trials. Numerical failures are recorded per
/// trial; the run is unacceptable when more than 0.1% fail.
pub fn run_resonance_sampling(
    params: &EnsembleParams,
    sampler: Sampler,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SamplingRun> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let records = with_workers(workers, || sample_records(params, sampler, seed, 0..trials))?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    Ok(SamplingRun {
        failure_rate: failures as f64 / trials as f64,
        records,
        failures,
    })
}

fn ensemble_params_json(report: &mut ExperimentReport, params: &EnsembleParams) {
    report
        .param("beta", params.beta)
        .param("n", params.n)
        .param("gamma", params.gamma)
        .param("kappa", params.kappa_dist.to_string());
}

/// Random coefficients: `n` uniform on `1..=n_max`, `a_j ∈ (0.1, 3)`, `b_j ∈ (-3, 3)`.
pub fn random_coefficients(stream: &mut RandomStream, n_max: usize) -> JacobiCoefficients {
    let n = 1 + ((stream.uniform_open() * n_max as f64) as usize).min(n_max - 1);
    let a = (0..n).map(|_| 0.1 + 2.9 * stream.uniform_open()).collect();
    let b = (0..n).map(|_| -3.0 + 6.0 * stream.uniform_open()).collect();
    JacobiCoefficients { a, b }
}

fn check_n_max(n_max: usize, limit: usize) -> Result<()> {
    if n_max == 0 || n_max > limit {
        return Err(Error::Parameter(format!("n must be in 1..={limit}, got {n_max}")));
    }
    Ok(())
}

/// Worst per-coordinate error `|Δ| / max(|x|, 1)` between two coefficient sets.
pub fn coefficient_error(x: &JacobiCoefficients, y: &JacobiCoefficients) -> f64 {
    x.a.iter()
        .chain(&x.b)
        .zip(y.a.iter().chain(&y.b))
        .map(|(u, v)| (u - v).abs() / u.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// `gc_inverse ∘ gc_forward` over random coefficients with `|a_n - 1| > 1e-3`.
pub fn roundtrip_suite(n_max: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    check_n_max(n_max, 64)?;
    let results: Vec<(f64, usize, Option<String>)> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut st = RandomStream::for_trial(seed, channel::ROUNDTRIP, trial);
                let mut redraws = 0;
                let c = loop {
                    let c = random_coefficients(&mut st, n_max);
                    if (c.a[c.n() - 1] - 1.0).abs() > 1e-3 {
                        break c;
                    }
                    redraws += 1;
                };
                let back = gc_forward(&c).and_then(|s| gc_inverse(s.last_lstar()));
                match back {
                    Ok(back) => (coefficient_error(&c, &back), redraws, None),
                    Err(e) => (f64::INFINITY, redraws, Some(e.to_string())),
                }
            })
            .collect()
    })?;
    let mut r = ExperimentReport::new("roundtrip", seed, trials as usize);
    r.param("n_max", n_max)
        .param("a_range", [0.1, 3.0])
        .param("b_range", [-3.0, 3.0]);
    let max_err = results.iter().map(|x| x.0).fold(0.0, f64::max);
    let over = results.iter().filter(|x| !(x.0 < TOL_ROUNDTRIP)).count();
    r.stat("redraws", results.iter().map(|x| x.1).sum::<usize>() as f64)
        .stat("trials_over_tolerance", over as f64)
        .stat("inverse_failures", results.iter().filter(|x| x.2.is_some()).count() as f64)
        .below("max_relative_error", max_err, TOL_ROUNDTRIP);
    if let Some((_, _, Some(e))) = results.iter().find(|x| x.2.is_some()) {
        r.note(format!("first inverse failure: {e}"));
    }
    Ok(r)
}

struct IdentityDraw {
    max: BTreeMap<String, f64>,
    imag: f64,
    skipped: usize,
    redraws: usize,
    error: Option<String>,
}

/// Identities (i)–(v) for every intermediate degree of random coefficient
/// draws; draws with a zero near `±1` are redrawn.
pub fn identities_suite(n_max: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    check_n_max(n_max, 16)?;
    let conv = lemma_v_convention()?;
    let draws: Vec<IdentityDraw> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut st = RandomStream::for_trial(seed, channel::IDENTITIES, trial);
                let mut out = IdentityDraw {
                    max: BTreeMap::new(),
                    imag: 0.0,
                    skipped: 0,
                    redraws: 0,
                    error: None,
                };
                let res: Result<()> = (|| {
                    let c = loop {
                        let c = random_coefficients(&mut st, n_max);
                        if generic_for_lemma_v(&c)? {
                            break c;
                        }
                        out.redraws += 1;
                        if out.redraws > MAX_REDRAWS {
                            return Err(Error::Numerical("no generic draw found".into()));
                        }
                    };
                    for m in 1..=2 * c.n() {
                        let rep = check_lemma_identities(&c, m)?;
                        for (k, v) in rep.residuals {
                            let e = out.max.entry(k).or_insert(0.0);
                            *e = e.max(v);
                        }
                        out.imag = out.imag.max(rep.lemma_v_imaginary.unwrap_or(0.0));
                        out.skipped += rep.skipped.len();
                    }
                    Ok(())
                })();
                out.error = res.err().map(|e| e.to_string());
                out
            })
            .collect()
    })?;

    let mut r = ExperimentReport::new("identities", seed, trials as usize);
    r.param("n_max", n_max)
        .param("a_range", [0.1, 3.0])
        .param("b_range", [-3.0, 3.0])
        .param("generic_unit_gap", GENERIC_UNIT_GAP)
        .param("lemma_v_convention", &conv.description)
        .param("lemma_v_fixture_lhs", &conv.fixture_lhs)
        .param("lemma_v_candidate_max_residual", &conv.max_residual);
    for name in ["lemma_i", "lemma_ii", "lemma_iii", "lemma_iv", "lemma_v"] {
        let v = draws
            .iter()
            .map(|d| d.max.get(name).copied().unwrap_or(0.0))
            .fold(0.0, f64::max);
        let tol = if name == "lemma_v" { TOL_LEMMA_V } else { TOL_LEMMA_I_IV };
        r.below(name, v, tol);
    }
    r.below("lemma_v_imaginary", draws.iter().map(|d| d.imag).fold(0.0, f64::max), 1e-9);
    let errors = draws.iter().filter(|d| d.error.is_some()).count();
    r.stat("redraws", draws.iter().map(|d| d.redraws).sum::<usize>() as f64)
        .stat("lemma_v_skipped", draws.iter().map(|d| d.skipped).sum::<usize>() as f64)
        .stat("failed_draws", errors as f64)
        .verdict("failed_draws", 0.0, errors == 0);
    if let Some(e) = draws.iter().find_map(|d| d.error.clone()) {
        r.note(format!("first failure: {e}"));
    }
    Ok(r)
}

fn generic_for_lemma_v(c: &JacobiCoefficients) -> Result<bool> {
    let seq = gc_forward(c)?;
    for l in &seq.lstar[1..] {
        let roots = polynomial_roots(l)?;
        if min_pair_factor(&roots) <= GENERIC_UNIT_GAP {
            return Ok(false);
        }
    }
    Ok(true)
}

fn clustered(c: &JacobiCoefficients) -> Result<bool> {
    let seq = gc_forward(c)?;
    for l in &seq.lstar[2..] {
        let z = polynomial_roots(l)?;
        for j in 0..z.len() {
            for k in j + 1..z.len() {
                if (z[j] - z[k]).norm() < CLUSTER_RADIUS {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// Finite-difference step and total Jacobians over random draws; draws with
/// clustered zeros are redrawn.
pub fn jacobian_suite(n_max: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    check_n_max(n_max, crate::identities_checks::MAX_TOTAL_JACOBIAN_N)?;
    type Draw = (f64, f64, f64, usize, Option<String>);
    let draws: Vec<Draw> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut st = RandomStream::for_trial(seed, channel::JACOBIAN, trial);
                let mut redraws = 0;
                let res: Result<(f64, f64, f64)> = (|| {
                    let c = loop {
                        let c = random_coefficients(&mut st, n_max);
                        if !clustered(&c)? {
                            break c;
                        }
                        redraws += 1;
                        if redraws > MAX_REDRAWS {
                            return Err(Error::Numerical("no unclustered draw found".into()));
                        }
                    };
                    let (mut e1, mut e2) = (0f64, 0f64);
                    for k in 0..c.n() {
                        let s = stepwise_jacobian_fd(&c, k, DEFAULT_FD_STEP)?;
                        e1 = e1.max(s.rel_err_b);
                        e2 = e2.max(s.rel_err_a);
                    }
                    Ok((e1, e2, total_jacobian_fd(&c, DEFAULT_FD_STEP)?.rel_err))
                })();
                match res {
                    Ok((a, b, t)) => (a, b, t, redraws, None),
                    Err(e) => (f64::INFINITY, f64::INFINITY, f64::INFINITY, redraws, Some(e.to_string())),
                }
            })
            .collect()
    })?;
    let mut r = ExperimentReport::new("jacobian", seed, trials as usize);
    r.param("n_max", n_max)
        .param("fd_step", DEFAULT_FD_STEP)
        .param("a_range", [0.1, 3.0])
        .param("b_range", [-3.0, 3.0])
        .param("cluster_radius", CLUSTER_RADIUS);
    let max = |f: fn(&Draw) -> f64| draws.iter().map(f).fold(0.0, f64::max);
    r.below("stepwise_b", max(|d| d.0), TOL_JACOBIAN)
        .below("stepwise_a", max(|d| d.1), TOL_JACOBIAN)
        .below("jacobian_total", max(|d| d.2), TOL_JACOBIAN)
        .stat("redraws", draws.iter().map(|d| d.3).sum::<usize>() as f64);
    if let Some(e) = draws.iter().find_map(|d| d.4.clone()) {
        r.note(format!("first failure: {e}"));
    }
    Ok(r)
}

/// Shared settings of the pipeline-based suites.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineSettings {
    pub betas: Vec<f64>,
    pub n_max: usize,
    pub gamma: f64,
    pub kappa_dist: KappaDistribution,
    pub sampler: Sampler,
}

impl PipelineSettings {
    /// Trial `i` uses `betas[i mod |betas|]` and `n = 1 + (i / |betas|) mod n_max`.
    pub fn params_for(&self, trial: u64) -> Result<EnsembleParams> {
        let nb = self.betas.len() as u64;
        let beta = self.betas[(trial % nb) as usize];
        let n = 1 + ((trial / nb) % self.n_max as u64) as usize;
        EnsembleParams::new(beta, n, self.gamma, self.kappa_dist)
    }

    fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.n_max == 0 {
            return Err(Error::Parameter("need at least one beta and n_max >= 1".into()));
        }
        self.params_for(0).map(|_| ())
    }

    fn echo(&self, r: &mut ExperimentReport) {
        r.param("betas", &self.betas)
            .param("n_max", self.n_max)
            .param("gamma", self.gamma)
            .param("kappa", self.kappa_dist.to_string())
            .param("sampler", self.sampler);
    }
}

/// S(2n) membership and `κ = √(1 - Π z_j)` over full-pipeline samples.
pub fn membership_suite(settings: &PipelineSettings, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    settings.validate()?;
    let rows: Vec<std::result::Result<(bool, f64, Option<String>), String>> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let params = settings.params_for(trial).map_err(|e| e.to_string())?;
                let mut st = RandomStream::for_trial(seed, channel::MEMBERSHIP, trial);
                let smp = sample_trial(&params, settings.sampler, &mut st).map_err(|e| e.to_string())?;
                let m = is_in_s(smp.expected_points(), &smp.config, MEMBERSHIP_TOL);
                let why = m.violated.map(|c| format!("trial {trial}: {c:?} {}", m.detail));
                Ok((m.member, smp.kappa_residual(), why))
            })
            .collect()
    })?;
    let mut r = ExperimentReport::new("membership", seed, trials as usize);
    settings.echo(&mut r);
    let ok: Vec<_> = rows.iter().filter_map(|x| x.as_ref().ok()).collect();
    let failures = rows.len() - ok.len();
    let members = ok.iter().filter(|x| x.0).count();
    let rate = failures as f64 / trials.max(1) as f64;
    r.stat("members", members as f64)
        .stat("membership_fraction", members as f64 / ok.len().max(1) as f64)
        .verdict("membership", 0.0, members == ok.len())
        .below(
            "max_kappa_residual",
            ok.iter().map(|x| x.1).fold(0.0, f64::max),
            TOL_KAPPA_IDENTITY,
        )
        .stat("failures", failures as f64)
        .stat("failure_rate", rate)
        .verdict("failure_rate", MAX_FAILURE_RATE, rate <= MAX_FAILURE_RATE);
    for why in ok.iter().filter_map(|x| x.2.clone()).take(5) {
        r.note(why);
    }
    if let Some(Err(e)) = rows.iter().find(|x| x.is_err()) {
        r.note(format!("first failure: {e}"));
    }
    Ok(r)
}

/// Per-trial outcome of the eigenvalue oracle.
#[derive(Clone, Copy, Debug, Default)]
struct EigenMatch {
    zeros_checked: usize,
    eigenvalues_checked: usize,
    forward_worst: f64,
    converse_worst: f64,
}

fn nearest(sorted: &[f64], x: f64) -> f64 {
    let i = sorted.partition_point(|v| *v < x);
    let mut best = f64::INFINITY;
    if i < sorted.len() {
        best = best.min((sorted[i] - x).abs());
    }
    if i > 0 {
        best = best.min((sorted[i - 1] - x).abs());
    }
    best
}

fn eigen_match(coeffs: &JacobiCoefficients, roots: &[Complex64], size: usize) -> Result<EigenMatch> {
    let op: TruncatedOperator = truncate(coeffs, size)?;
    let evs = tridiag_eigenvalues(&op);
    let mut images: Vec<f64> = Vec::new();
    let mut out = EigenMatch::default();
    for z in roots.iter().filter(|z| z.norm() > 1.0) {
        let e = joukowsky(*z)?;
        images.push(e.re);
        if z.norm() > EIGEN_MODULUS_CUTOFF {
            out.zeros_checked += 1;
            out.forward_worst = out.forward_worst.max(nearest(&evs, e.re).max(e.im.abs()));
        }
    }
    images.sort_by(f64::total_cmp);
    for &e in evs.iter().filter(|e| e.abs() > 2.0 + EIGEN_BAND_MARGIN) {
        out.eigenvalues_checked += 1;
        out.converse_worst = out.converse_worst.max(nearest(&images, e));
    }
    Ok(out)
}

/// Zeros of `L*` outside the disk against eigenvalues of the truncated operator.
pub fn eigen_oracle_suite(
    settings: &PipelineSettings,
    truncation: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    settings.validate()?;
    let rows: Vec<std::result::Result<EigenMatch, String>> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let params = settings.params_for(trial).map_err(|e| e.to_string())?;
                let mut st = RandomStream::for_trial(seed, channel::EIGEN, trial);
                let smp = sample_trial(&params, settings.sampler, &mut st).map_err(|e| e.to_string())?;
                eigen_match(&smp.coeffs, &smp.config.points(), truncation).map_err(|e| e.to_string())
            })
            .collect()
    })?;
    let mut r = ExperimentReport::new("eigen_oracle", seed, trials as usize);
    settings.echo(&mut r);
    r.param("truncation", truncation)
        .param("modulus_cutoff", EIGEN_MODULUS_CUTOFF)
        .param("band_margin", EIGEN_BAND_MARGIN);
    let ok: Vec<&EigenMatch> = rows.iter().filter_map(|x| x.as_ref().ok()).collect();
    let failures = rows.len() - ok.len();
    r.stat("zeros_checked", ok.iter().map(|m| m.zeros_checked).sum::<usize>() as f64)
        .stat("eigenvalues_checked", ok.iter().map(|m| m.eigenvalues_checked).sum::<usize>() as f64)
        .below(
            "zero_to_eigenvalue",
            ok.iter().map(|m| m.forward_worst).fold(0.0, f64::max),
            TOL_EIGEN_MATCH,
        )
        .below(
            "eigenvalue_to_zero",
            ok.iter().map(|m| m.converse_worst).fold(0.0, f64::max),
            TOL_EIGEN_MATCH,
        )
        .stat("failures", failures as f64)
        .verdict("failures", 0.0, failures == 0);
    if let Some(Err(e)) = rows.iter().find(|x| x.is_err()) {
        r.note(format!("first failure: {e}"));
    }
    Ok(r)
}

/// `Σ_j z_j` over pipeline samples against `N(0, 2γ²/β)`.
pub fn sum_zeros_test(
    params: &EnsembleParams,
    sampler: Sampler,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    params.validate()?;
    if trials < 1000 {
        return Err(Error::Parameter(format!("sum-of-zeros test needs at least 1000 trials, got {trials}")));
    }
    let variance = 2.0 * params.gamma * params.gamma / params.beta;
    let sd = variance.sqrt();
    let run = |ch: u16| -> Result<(KsResult, f64, f64, usize)> {
        let rows: Vec<Result<(f64, f64, f64)>> = with_workers(workers, || {
            (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut st = RandomStream::for_trial(seed, ch, trial);
                    let smp = sample_trial(params, sampler, &mut st)?;
                    let raw: Complex64 = smp.roots.iter().sum();
                    let sum_b: f64 = smp.coeffs.b.iter().sum();
                    let scale = smp.roots.iter().map(|z| z.norm()).sum::<f64>().max(1.0);
                    Ok((smp.config.sum(), raw.im.abs(), (raw.re - sum_b).abs() / scale))
                })
                .collect()
        })?;
        let mut sums = Vec::with_capacity(rows.len());
        let (mut imag, mut coef, mut failures) = (0f64, 0f64, 0);
        for row in rows {
            match row {
                Ok((s, i, c)) => {
                    sums.push(s);
                    imag = imag.max(i);
                    coef = coef.max(c);
                }
                Err(_) => failures += 1,
            }
        }
        Ok((ks_test(&sums, |x| normal_cdf(x / sd))?, imag, coef, failures))
    };
    let mut r = ExperimentReport::new("sum_zeros", seed, trials as usize);
    ensemble_params_json(&mut r, params);
    r.param("sampler", sampler).param("reference_variance", variance);
    let mut attempt = run(channel::SAMPLE)?;
    if attempt.0.p_value <= ALPHA {
        r.note(format!(
            "first attempt rejected (D = {}, p = {}); retried on a fresh substream",
            attempt.0.statistic, attempt.0.p_value
        ));
        r.stat("first_attempt_p_value", attempt.0.p_value);
        attempt = run(channel::SAMPLE + channel::RETRY)?;
    }
    let (ks, imag, coef, failures) = attempt;
    r.stat("ks_statistic", ks.statistic)
        .stat("p_value", ks.p_value)
        .verdict("ks", ALPHA, ks.p_value > ALPHA)
        .below("max_imaginary_sum", imag, 1e-9)
        .below("max_sum_vs_b", coef, 1e-9)
        .stat("failures", failures as f64)
        .verdict("failures", 0.0, failures as f64 <= MAX_FAILURE_RATE * trials as f64);
    Ok(r)
}

/// Second and fourth spectral moments of the tridiagonal model against the
/// semicircle values 1 and 2.
pub fn semicircle_moment_test(beta: f64, n: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    if n < 50 {
        return Err(Error::Parameter(format!("semicircle test needs n >= 50, got {n}")));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let params = EnsembleParams::new(beta, n, 1.0, KappaDistribution::Point { value: 1.0 })?;
    let rows: Vec<Result<(f64, f64)>> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut st = RandomStream::for_trial(seed, channel::SEMICIRCLE, trial);
                let smp = sample_de_tridiagonal(&params, &mut st)?;
                let evs = tridiag_eigenvalues(&TruncatedOperator {
                    diag: smp.s,
                    offdiag: smp.t,
                });
                let nf = n as f64;
                Ok((
                    evs.iter().map(|x| x * x).sum::<f64>() / nf,
                    evs.iter().map(|x| x.powi(4)).sum::<f64>() / nf,
                ))
            })
            .collect()
    })?;
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let m2 = rows.iter().map(|x| x.0).sum::<f64>() / rows.len() as f64;
    let m4 = rows.iter().map(|x| x.1).sum::<f64>() / rows.len() as f64;
    let mut r = ExperimentReport::new("semicircle", seed, trials as usize);
    r.param("beta", beta).param("n", n);
    r.stat("second_moment", m2)
        .stat("fourth_moment", m4)
        .below("second_moment_deviation", (m2 - 1.0).abs(), 0.02)
        .below("fourth_moment_deviation", (m4 - 2.0).abs(), 0.05);
    Ok(r)
}

fn tridiagonal_coordinates(smp: &TridiagonalSample) -> Vec<f64> {
    smp.s.iter().chain(&smp.t).copied().collect()
}

/// Per-coordinate two-sample KS of `(s, t)` from the dense sampler followed by
/// Householder reduction against the tridiagonal model, one retry permitted.
pub fn dense_vs_tridiagonal_test(beta: f64, n: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    let params = EnsembleParams::new(beta, n, 1.0, KappaDistribution::Point { value: 1.0 })?;
    if trials < 20 {
        return Err(Error::Parameter("need at least 20 trials".into()));
    }
    let draw = |retry: u16| -> Result<Vec<KsResult>> {
        let (dense, tri): (Vec<Vec<f64>>, Vec<Vec<f64>>) = with_workers(workers, || -> Result<_> {
            let dense = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut st = RandomStream::for_trial(seed, channel::DENSE + retry, trial);
                    let m = sample_dense_gaussian(beta, n, &mut st)?;
                    Ok(tridiagonal_coordinates(&householder_tridiagonalize(&m)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let tri = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut st = RandomStream::for_trial(seed, channel::TRIDIAGONAL + retry, trial);
                    Ok(tridiagonal_coordinates(&sample_de_tridiagonal(&params, &mut st)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((dense, tri))
        })??;
        (0..2 * n - 1)
            .map(|c| {
                let x: Vec<f64> = dense.iter().map(|v| v[c]).collect();
                let y: Vec<f64> = tri.iter().map(|v| v[c]).collect();
                ks_two_sample(&x, &y)
            })
            .collect()
    };
    let mut r = ExperimentReport::new("dense_vs_tridiagonal", seed, trials as usize);
    r.param("beta", beta).param("n", n);
    let mut res = draw(0)?;
    let min_p = |v: &[KsResult]| v.iter().map(|k| k.p_value).fold(1.0, f64::min);
    if min_p(&res) <= ALPHA {
        r.note(format!(
            "first attempt rejected (min p = {}); retried on fresh substreams",
            min_p(&res)
        ));
        r.stat("first_attempt_min_p_value", min_p(&res));
        res = draw(channel::RETRY)?;
    }
    for (c, k) in res.iter().enumerate() {
        let name = if c < n { format!("s{}", c + 1) } else { format!("t{}", c - n + 1) };
        r.stat(&format!("{name}_ks_statistic"), k.statistic)
            .stat(&format!("{name}_p_value"), k.p_value);
    }
    r.stat("min_p_value", min_p(&res)).verdict("ks", ALPHA, min_p(&res) > ALPHA);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi() -> KappaDistribution {
        KappaDistribution::Chi { k: 3.0, scale: 0.5 }
    }

    #[test]
    fn sampling_is_deterministic_and_ordered() {
        let p = EnsembleParams::new(2.0, 3, 1.0, chi()).unwrap();
        let a = run_resonance_sampling(&p, Sampler::Tridiagonal, 1, 7, 1).unwrap();
        let b = run_resonance_sampling(&p, Sampler::Tridiagonal, 1, 7, 4).unwrap();
        assert_eq!(
            serde_json::to_string(&a.records).unwrap(),
            serde_json::to_string(&b.records).unwrap()
        );
        let many = run_resonance_sampling(&p, Sampler::Tridiagonal, 50, 7, 3).unwrap();
        assert!(many.records.iter().enumerate().all(|(i, r)| r.trial == i as u64));
        assert_eq!(many.failures, 0);
        for rec in &many.records {
            assert!(rec.in_s);
            assert!(rec.kappa_check_residual < 1e-9);
            assert_eq!(rec.zeros.len(), 6);
        }
    }

    #[test]
    fn point_kappa_one_gives_odd_count() {
        let p = EnsembleParams::new(1.0, 2, 1.0, KappaDistribution::Point { value: 1.0 }).unwrap();
        let run = run_resonance_sampling(&p, Sampler::Tridiagonal, 20, 3, 2).unwrap();
        for rec in &run.records {
            assert_eq!(rec.zeros.len(), 3);
            assert!(rec.in_s, "{rec:?}");
        }
    }

    #[test]
    fn dense_sampler_pipeline() {
        let p = EnsembleParams::new(2.0, 3, 1.0, chi()).unwrap();
        let run = run_resonance_sampling(&p, Sampler::Dense, 20, 3, 2).unwrap();
        assert!(run.records.iter().all(|r| r.in_s));
        let p4 = EnsembleParams::new(4.0, 3, 1.0, chi()).unwrap();
        let run = run_resonance_sampling(&p4, Sampler::Dense, 5, 3, 2).unwrap();
        assert_eq!(run.failures, 5);
        assert!(!run.acceptable());
    }

    #[test]
    fn small_suites_pass() {
        assert!(roundtrip_suite(4, 200, 1, 2).unwrap().passed);
        let r = identities_suite(4, 50, 2, 2).unwrap();
        assert!(r.passed, "{}", r.to_json());
        let r = jacobian_suite(3, 10, 3, 2).unwrap();
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn sum_zeros_variance_scaling() {
        let p1 = EnsembleParams::new(2.0, 4, 1.0, chi()).unwrap();
        let r = sum_zeros_test(&p1, Sampler::Tridiagonal, 2000, 5, 0).unwrap();
        assert!(r.passed, "{}", r.to_json());
        assert_eq!(r.parameters["reference_variance"], serde_json::json!(1.0));
        let p2 = EnsembleParams::new(2.0, 4, 2.0, chi()).unwrap();
        let r2 = sum_zeros_test(&p2, Sampler::Tridiagonal, 2000, 5, 0).unwrap();
        assert_eq!(r2.parameters["reference_variance"], serde_json::json!(4.0));
        assert!(r2.passed);
        assert!(sum_zeros_test(&p1, Sampler::Tridiagonal, 999, 5, 0).is_err());
    }

    #[test]
    fn semicircle_preconditions() {
        assert!(semicircle_moment_test(2.0, 49, 10, 1, 0).is_err());
        let r = semicircle_moment_test(2.0, 60, 20, 1, 0).unwrap();
        assert!((r.statistics["second_moment"] - 1.0).abs() < 0.05);
    }

    #[test]
    fn nearest_lookup() {
        let v = [-3.0, 0.5, 2.5];
        assert_eq!(nearest(&v, 2.4), 0.10000000000000009);
        assert_eq!(nearest(&v, -10.0), 7.0);
        assert_eq!(nearest(&[], 1.0), f64::INFINITY);
    }

    #[test]
    fn eigen_match_worked_example() {
        // zeros 4, -2 map to 4.25, -2.5
        let c = JacobiCoefficients::new(vec![3.0], vec![2.0]).unwrap();
        let roots = [Complex64::new(4.0, 0.0), Complex64::new(-2.0, 0.0)];
        let m = eigen_match(&c, &roots, 400).unwrap();
        assert_eq!(m.zeros_checked, 2);
        assert_eq!(m.eigenvalues_checked, 2);
        assert!(m.forward_worst < 1e-10 && m.converse_worst < 1e-10);
    }
}
