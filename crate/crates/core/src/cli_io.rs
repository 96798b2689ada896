//! Command-line surface of the `jres` binary.
//!
//! Streams are JSON lines, reports are single JSON documents, and paths accept
//! `-` for standard input/output. Exit codes: 0 success, 1 verification
//! failure, 2 usage or validation error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::density_model::{log_density_kappa1, log_density_random_kappa, DensityParams};
use crate::error::Error;
use crate::experiments::{
    self, density_mc_compare_n1, normalization_n1, with_workers, ExperimentReport, N1Quadrature, PipelineSettings,
    Sampler, ZeroRecord,
};
use crate::gc_engine::gc_forward;
use crate::operator_model::{JacobiCoefficients, DEFAULT_TRUNCATION};
use crate::rng_ensembles::{EnsembleParams, KappaDistribution};
use crate::spectra::{
    canonicalize_conjugates, classify, is_in_s, joukowsky, polynomial_roots, PointLabel, MEMBERSHIP_TOL,
    REAL_SNAP_TOL,
};
use crate::Complex64;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_KAPPA: &str = "chi:3:0.5";
/// Trials per parallel batch of the sampling stream.
const SAMPLE_BATCH: u64 = 4096;

#[derive(Debug, Parser)]
#[command(name = "jres", version, about = "Eigenvalues and resonances of Gaussian matrices coupled to the discrete Laplacian")]
pub struct Cli {
    /// Master seed; every trial uses its own substream of it.
    #[arg(long, global = true, env = "JRES_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Does not affect any output.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the coupled ensemble and stream one record per trial.
    Sample(SampleArgs),
    /// Zeros, labels and admissibility for given Jacobi coefficients.
    Spectrum(SpectrumArgs),
    /// Run a verification suite and write its report.
    Verify(VerifyArgs),
    /// Evaluate or check the closed-form joint law.
    Density(DensityArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Law of κ: point:v | uniform:lo:hi | chi:k:scale
    #[arg(long, default_value = DEFAULT_KAPPA)]
    #[serde(serialize_with = "display")]
    pub kappa: KappaDistribution,
}

fn display<S: serde::Serializer>(k: &KappaDistribution, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(k)
}

impl EnsembleArgs {
    fn params(&self) -> crate::Result<EnsembleParams> {
        EnsembleParams::new(self.beta, self.n, self.gamma, self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    Jsonl,
    /// One row per zero: trial, re, im, label.
    Csv,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = Sampler::Tridiagonal)]
    pub sampler: Sampler,
    #[arg(long, value_enum, default_value_t = StreamFormat::Jsonl)]
    pub format: StreamFormat,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    /// Also write the effective configuration as a JSON document.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// JSON document with arrays `a` and `b`.
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Jacobian,
    Roundtrip,
    Membership,
    /// Zeros outside the disk against a truncated operator.
    Eigen,
    /// Σ z_j against its normal law.
    SumZeros,
    Semicircle,
    /// Dense sampler with Householder reduction against the tridiagonal model.
    Dense,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Matrix size (upper bound where the suite mixes sizes); suite default if omitted.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Comma-separated β values; suite default if omitted.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value = DEFAULT_KAPPA)]
    pub kappa: KappaDistribution,
    #[arg(long, value_enum, default_value_t = Sampler::Tridiagonal)]
    pub sampler: Sampler,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: usize,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(subcommand)]
    pub action: DensityAction,
}

#[derive(Debug, Subcommand)]
pub enum DensityAction {
    /// Log-density of a configuration document `{"zeros": [{"re", "im"}, ...]}`.
    Eval {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Use the κ = 1 law on 2n - 1 points.
        #[arg(long)]
        kappa_one: bool,
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        #[arg(long, short, default_value = "-")]
        output: PathBuf,
    },
    /// Binned Monte Carlo frequencies against the quadrature of the law (n = 1).
    McCompare {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, short, default_value = "-")]
        output: PathBuf,
    },
    /// Total quadrature mass of the law (n = 1).
    Normalize {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Panels per bin and axis.
        #[arg(long, default_value_t = 4)]
        sub: usize,
        #[arg(long, short, default_value = "-")]
        output: PathBuf,
    },
}

/// Exit status of a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Success
        } else {
            Self::VerificationFailed
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::VerificationFailed => 1,
        }
    }
}

/// 2 for bad input, 1 for everything that went wrong at run time.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parameter(_)
            | Error::Unsupported(_)
            | Error::Validation(_)
            | Error::Size(_)
            | Error::Shape(_)
            | Error::Inconsistent(_)
            | Error::InvalidConfiguration(_)
            | Error::Domain(_)
            | Error::Asymmetry(_)
            | Error::Singular(_),
        ) => 2,
        Some(Error::Numerical(_)) => 1,
        None if err.downcast_ref::<serde_json::Error>().is_some() => 2,
        None => 1,
    }
}

pub fn open_output(path: &PathBuf) -> anyhow::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

pub fn open_input(path: &PathBuf) -> anyhow::Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin().lock())))
    } else {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> anyhow::Result<T> {
    let mut text = String::new();
    open_input(path)?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_document(path: &PathBuf, value: &impl Serialize) -> anyhow::Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_report(path: &PathBuf, report: &ExperimentReport, command: serde_json::Value) -> anyhow::Result<Outcome> {
    write_document(path, &json!({ "command": command, "report": report }))?;
    Ok(Outcome::from_pass(report.passed))
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Sample(args) => cmd_sample(&args, cli.seed, cli.workers),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Verify(args) => cmd_verify(&args, cli.seed, cli.workers),
        Command::Density(args) => cmd_density(args.action, cli.seed, cli.workers),
    }
}

pub fn cmd_sample(args: &SampleArgs, seed: u64, workers: usize) -> anyhow::Result<Outcome> {
    let params = args.ensemble.params()?;
    if let Some(path) = &args.manifest {
        write_document(
            path,
            &json!({
                "command": "sample",
                "seed": seed,
                "ensemble": args.ensemble,
                "trials": args.trials,
                "sampler": args.sampler,
                "format": args.format,
            }),
        )?;
    }
    let mut out = open_output(&args.output)?;
    if args.format == StreamFormat::Csv {
        writeln!(out, "trial,re,im,label")?;
    }
    let mut failures = 0u64;
    let mut start = 0;
    while start < args.trials {
        let end = (start + SAMPLE_BATCH).min(args.trials);
        let batch = with_workers(workers, || experiments::sample_records(&params, args.sampler, seed, start..end))?;
        for rec in &batch {
            failures += u64::from(rec.error.is_some());
            match args.format {
                StreamFormat::Jsonl => {
                    serde_json::to_writer(&mut out, rec)?;
                    writeln!(out)?;
                }
                StreamFormat::Csv => {
                    for z in &rec.zeros {
                        writeln!(out, "{},{},{},{}", rec.trial, z.re, z.im, z.label)?;
                    }
                }
            }
        }
        start = end;
    }
    out.flush()?;
    if args.trials > 0 && failures as f64 / args.trials as f64 > experiments::MAX_FAILURE_RATE {
        eprintln!("{failures} of {} trials failed numerically", args.trials);
        return Ok(Outcome::VerificationFailed);
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Deserialize)]
struct CoefficientsDoc {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SpectrumDoc {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Ascending coefficients of `L*_{2n}`.
    pub lstar: Vec<f64>,
    pub zeros: Vec<ZeroRecord>,
    pub origin_zeros: usize,
    /// Index `k` of the admissible set the configuration is tested against.
    pub membership_order: usize,
    #[serde(rename = "in_S")]
    pub in_s: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_violation: Option<String>,
    pub eigenvalue_images: Vec<f64>,
}

pub fn spectrum_of(a: Vec<f64>, b: Vec<f64>) -> crate::Result<SpectrumDoc> {
    let coeffs = JacobiCoefficients::new(a, b)?;
    let seq = gc_forward(&coeffs)?;
    let lstar = seq.last_lstar();
    let roots = polynomial_roots(lstar)?;
    let config = canonicalize_conjugates(&roots, REAL_SNAP_TOL)?;
    let order = 2 * coeffs.n() - config.origin_drops();
    let m = is_in_s(order, &config, MEMBERSHIP_TOL);
    let labeled = classify(&config);
    let images = labeled
        .iter()
        .filter(|p| p.label == PointLabel::Eigenvalue)
        .map(|p| joukowsky(p.z).map(|e| e.re))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(SpectrumDoc {
        lstar: lstar.coeffs().to_vec(),
        zeros: labeled
            .iter()
            .map(|p| ZeroRecord {
                re: p.z.re,
                im: p.z.im,
                label: p.label,
            })
            .collect(),
        origin_zeros: config.origin_drops(),
        membership_order: order,
        in_s: m.member,
        membership_violation: m.violated.map(|c| format!("{c:?}: {}", m.detail)),
        eigenvalue_images: images,
        a: coeffs.a,
        b: coeffs.b,
    })
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> anyhow::Result<Outcome> {
    let doc: CoefficientsDoc = read_json(&args.input)?;
    write_document(&args.output, &spectrum_of(doc.a, doc.b)?)?;
    Ok(Outcome::Success)
}

pub fn cmd_verify(args: &VerifyArgs, seed: u64, workers: usize) -> anyhow::Result<Outcome> {
    let single_beta = || -> anyhow::Result<f64> {
        match args.beta.as_slice() {
            [] => Ok(2.0),
            [b] => Ok(*b),
            _ => bail!(Error::Parameter(format!("suite {:?} takes a single beta", args.suite))),
        }
    };
    let betas = if args.beta.is_empty() { vec![1.0, 2.0, 4.0] } else { args.beta.clone() };
    let settings = |n_max: usize| PipelineSettings {
        betas: betas.clone(),
        n_max,
        gamma: args.gamma,
        kappa_dist: args.kappa,
        sampler: args.sampler,
    };
    let n = |default: usize| args.n.unwrap_or(default);
    let trials = |default: u64| args.trials.unwrap_or(default);
    let report = match args.suite {
        Suite::Roundtrip => experiments::roundtrip_suite(n(8), trials(1000), seed, workers)?,
        Suite::Identities => experiments::identities_suite(n(8), trials(1000), seed, workers)?,
        Suite::Jacobian => experiments::jacobian_suite(n(5), trials(100), seed, workers)?,
        Suite::Membership => experiments::membership_suite(&settings(n(5)), trials(10_000), seed, workers)?,
        Suite::Eigen => experiments::eigen_oracle_suite(&settings(n(6)), args.truncation, trials(100), seed, workers)?,
        Suite::SumZeros => {
            let p = EnsembleParams::new(single_beta()?, n(4), args.gamma, args.kappa)?;
            experiments::sum_zeros_test(&p, args.sampler, trials(10_000), seed, workers)?
        }
        Suite::Semicircle => experiments::semicircle_moment_test(single_beta()?, n(200), trials(100), seed, workers)?,
        Suite::Dense => experiments::dense_vs_tridiagonal_test(single_beta()?, n(4), trials(10_000), seed, workers)?,
    };
    write_report(&args.output, &report, json!({ "name": "verify", "suite": args.suite, "seed": seed }))
}

#[derive(Debug, Deserialize)]
struct ConfigurationDoc {
    zeros: Vec<PointDoc>,
}

#[derive(Debug, Deserialize)]
struct PointDoc {
    re: f64,
    #[serde(default)]
    im: f64,
}

fn require_n1(ensemble: &EnsembleArgs) -> anyhow::Result<()> {
    if ensemble.n != 1 {
        bail!(Error::Parameter(format!("this action is defined for n = 1 only, got n = {}", ensemble.n)));
    }
    Ok(())
}

pub fn cmd_density(action: DensityAction, seed: u64, workers: usize) -> anyhow::Result<Outcome> {
    match action {
        DensityAction::Eval {
            ensemble,
            kappa_one,
            input,
            output,
        } => {
            let doc: ConfigurationDoc = read_json(&input)?;
            let points: Vec<Complex64> = doc.zeros.iter().map(|p| Complex64::new(p.re, p.im)).collect();
            let config = canonicalize_conjugates(&points, REAL_SNAP_TOL)?;
            let params = DensityParams::new(ensemble.beta, ensemble.n, ensemble.gamma, ensemble.kappa)?;
            let value = if kappa_one {
                log_density_kappa1(&config, &params)?
            } else {
                log_density_random_kappa(&config, &params)?
            };
            write_document(
                &output,
                &json!({
                    "command": { "name": "density eval", "ensemble": ensemble, "kappa_one": kappa_one },
                    "zeros": config.points().iter().map(|z| json!({ "re": z.re, "im": z.im })).collect::<Vec<_>>(),
                    "log_value": value.log_value,
                    "kappa_implied": value.kappa_implied,
                    "in_support": value.in_support,
                    "on_unit_circle": value.on_unit_circle,
                }),
            )?;
            Ok(Outcome::Success)
        }
        DensityAction::McCompare {
            ensemble,
            trials,
            bins,
            output,
        } => {
            require_n1(&ensemble)?;
            let quad = N1Quadrature {
                bins,
                ..Default::default()
            };
            let report =
                density_mc_compare_n1(ensemble.beta, ensemble.gamma, ensemble.kappa, trials, &quad, seed, workers)?;
            write_report(&output, &report, json!({ "name": "density mc-compare", "seed": seed }))
        }
        DensityAction::Normalize {
            ensemble,
            bins,
            sub,
            output,
        } => {
            require_n1(&ensemble)?;
            let quad = N1Quadrature {
                bins,
                sub,
                ..Default::default()
            };
            let report = normalization_n1(ensemble.beta, ensemble.gamma, ensemble.kappa, &quad, workers)?;
            write_report(&output, &report, json!({ "name": "density normalize" }))
        }
    }
}
