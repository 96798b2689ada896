//! Acceptance criteria 1-8 at full scale. Runs without the libtest harness so
//! that every criterion prints its `CRITERION <k>: PASS|FAIL` line; the process
//! exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use jacobi_resonances::experiments::{
    self, density_mc_compare_n1, normalization_n1, ExperimentReport, N1Quadrature, PipelineSettings, Sampler,
};
use jacobi_resonances::rng_ensembles::{EnsembleParams, KappaDistribution};

const SEED: u64 = 20261018;
const KAPPA: KappaDistribution = KappaDistribution::Chi { k: 3.0, scale: 0.5 };

fn pipeline(n_max: usize) -> PipelineSettings {
    PipelineSettings {
        betas: vec![1.0, 2.0, 4.0],
        n_max,
        gamma: 1.0,
        kappa_dist: KAPPA,
        sampler: Sampler::Tridiagonal,
    }
}

fn summary(r: &ExperimentReport) -> String {
    let failed: Vec<&str> = r.verdicts.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.as_str()).collect();
    format!("{} {:?} failed={:?}", r.name, r.statistics, failed)
}

fn conclude(k: u32, ok: bool, detail: &str) -> bool {
    println!("CRITERION {k}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn criterion_1_round_trip() -> bool {
    let t = Instant::now();
    let r = experiments::roundtrip_suite(8, 1000, SEED, 1).unwrap();
    let elapsed = t.elapsed();
    let ok = r.passed && elapsed < Duration::from_secs(10);
    conclude(1, ok, &format!("{} elapsed={elapsed:?}", summary(&r)))
}

fn criterion_2_eigenvalue_oracle() -> bool {
    let r = experiments::eigen_oracle_suite(&pipeline(6), 2000, 100, SEED, 0).unwrap();
    conclude(2, r.passed, &summary(&r))
}

fn criterion_3_lemma_identities() -> bool {
    let r = experiments::identities_suite(8, 1000, SEED, 0).unwrap();
    conclude(3, r.passed, &summary(&r))
}

fn criterion_4_jacobians() -> bool {
    let r = experiments::jacobian_suite(5, 100, SEED, 0).unwrap();
    conclude(4, r.passed, &summary(&r))
}

fn criterion_5_support() -> bool {
    let r = experiments::membership_suite(&pipeline(5), 10_000, SEED, 0).unwrap();
    conclude(5, r.passed, &summary(&r))
}

fn criterion_6_density_n1() -> bool {
    let t = Instant::now();
    let quad = N1Quadrature::default();
    let mut ok = true;
    let mut detail = String::new();
    for beta in [1.0, 2.0] {
        let norm = normalization_n1(beta, 1.0, KAPPA, &quad, 0).unwrap();
        let mc = density_mc_compare_n1(beta, 1.0, KAPPA, 1_000_000, &quad, SEED, 0).unwrap();
        ok &= norm.passed && mc.passed;
        detail.push_str(&format!("[beta={beta}: {} | {}] ", summary(&norm), summary(&mc)));
    }
    let elapsed = t.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    conclude(6, ok, &format!("{detail}elapsed={elapsed:?}"))
}

fn criterion_7_distributions() -> bool {
    let mut reports = Vec::new();
    for beta in [1.0, 2.0] {
        let p = EnsembleParams::new(beta, 3, 1.0, KAPPA).unwrap();
        reports.push(experiments::sum_zeros_test(&p, Sampler::Tridiagonal, 10_000, SEED, 0).unwrap());
        reports.push(experiments::semicircle_moment_test(beta, 200, 100, SEED, 0).unwrap());
        reports.push(experiments::dense_vs_tridiagonal_test(beta, 4, 10_000, SEED, 0).unwrap());
    }
    for r in &reports {
        for n in &r.notes {
            println!("  {}: {n}", r.name);
        }
    }
    let ok = reports.iter().all(|r| r.passed);
    let detail: Vec<String> = reports.iter().map(summary).collect();
    conclude(7, ok, &detail.join(" | "))
}

fn jres(args: &[&str], workers: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_jres"))
        .args(["--seed", "7", "--workers", workers])
        .args(args)
        .env_remove("JRES_SEED")
        .output()
        .expect("jres runs");
    assert!(out.status.code().is_some_and(|c| c <= 1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn criterion_8_determinism() -> bool {
    let commands: &[&[&str]] = &[
        &["sample", "--beta", "2", "--n", "3", "--trials", "5000"],
        &["sample", "--beta", "1", "--n", "4", "--trials", "300", "--sampler", "dense", "--format", "csv"],
        &["verify", "roundtrip", "--trials", "300"],
        &["verify", "identities", "--trials", "200"],
        &["verify", "jacobian", "--trials", "20"],
        &["verify", "membership", "--trials", "2000"],
        &["verify", "eigen", "--trials", "5", "--truncation", "500"],
        &["verify", "sum-zeros", "--trials", "2000"],
        &["verify", "dense", "--trials", "2000"],
        &["density", "normalize", "--n", "1", "--bins", "10", "--sub", "2"],
        &["density", "mc-compare", "--n", "1", "--trials", "100000", "--bins", "10"],
    ];
    let mut mismatched = Vec::new();
    for args in commands {
        let one = jres(args, "1");
        let eight = jres(args, "8");
        let again = jres(args, "8");
        if one.is_empty() || one != eight || eight != again {
            mismatched.push(args.join(" "));
        }
    }
    conclude(8, mismatched.is_empty(), &format!("{} commands, mismatched={mismatched:?}", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> bool); 8] = [
        ("round trip", criterion_1_round_trip),
        ("eigenvalue oracle", criterion_2_eigenvalue_oracle),
        ("lemma identities", criterion_3_lemma_identities),
        ("jacobians", criterion_4_jacobians),
        ("support", criterion_5_support),
        ("density n=1", criterion_6_density_n1),
        ("distributions", criterion_7_distributions),
        ("determinism", criterion_8_determinism),
    ];
    let failed: Vec<&str> = criteria.iter().filter(|(_, f)| !f()).map(|(name, _)| *name).collect();
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
