//! Coupled Jacobi coefficients and spectra of finite sections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng_ensembles::TridiagonalSample;

/// Default finite-section size for the eigenvalue oracle.
pub const DEFAULT_TRUNCATION: usize = 2000;
/// Default band margin for [`eigenvalues_outside_band`].
pub const DEFAULT_MARGIN: f64 = 0.01;

/// First `n` Jacobi parameters; beyond them `a_j = 1`, `b_j = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl JacobiCoefficients {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let c = Self { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn free(n: usize) -> Self {
        Self {
            a: vec![1.0; n],
            b: vec![0.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::Validation(format!(
                "a has {} entries but b has {}",
                self.a.len(),
                self.b.len()
            )));
        }
        if let Some(j) = self.a.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::Validation(format!("a[{j}] = {} is not positive", self.a[j])));
        }
        if let Some(j) = self.b.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("b[{j}] is not finite")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Number of nonzero zeros of `L*`: `2s` when the last nontrivial index `s`
    /// has `a_s ≠ 1`, `2s - 1` when only `b_s` is nontrivial there.
    pub fn perturbation_order(&self) -> usize {
        let last = (0..self.n()).rev().find(|&j| self.a[j] != 1.0 || self.b[j] != 0.0);
        match last {
            None => 0,
            Some(j) if self.a[j] != 1.0 => 2 * (j + 1),
            Some(j) => 2 * (j + 1) - 1,
        }
    }
}

/// Jacobi parameters of `γH` coupled to the free half-line through `κ`:
/// the tridiagonal entries reversed and scaled,
/// `a = (|γ| t_{n-1}, …, |γ| t_1, κ)`, `b = (γ s_n, …, γ s_1)`.
///
/// Off-diagonal signs are a diagonal ±1 gauge, so `|γ|` keeps `a_j > 0` without
/// changing the spectrum.
pub fn assemble_coupled(tridiag: &TridiagonalSample, gamma: f64, kappa: f64) -> Result<JacobiCoefficients> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Parameter(format!("kappa must be positive, got {kappa}")));
    }
    if !(gamma.is_finite() && gamma != 0.0) {
        return Err(Error::Parameter(format!("gamma must be nonzero, got {gamma}")));
    }
    let n = tridiag.n();
    if tridiag.t.len() + 1 != n {
        return Err(Error::Size(format!(
            "tridiagonal sample with {} diagonal and {} off-diagonal entries",
            n,
            tridiag.t.len()
        )));
    }
    let mut a: Vec<f64> = tridiag.t.iter().rev().map(|t| gamma.abs() * t).collect();
    a.push(kappa);
    let b = tridiag.s.iter().rev().map(|s| gamma * s).collect();
    JacobiCoefficients::new(a, b)
}

/// Finite `N × N` section of a Jacobi operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TruncatedOperator {
    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i > 0 { self.offdiag[i - 1] * self.offdiag[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue_by_bisection(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs()) + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn truncate(coeffs: &JacobiCoefficients, size: usize) -> Result<TruncatedOperator> {
    let n = coeffs.n();
    if size <= n {
        return Err(Error::Size(format!("truncation size {size} must exceed n = {n}")));
    }
    let mut diag = vec![0.0; size];
    let mut offdiag = vec![1.0; size - 1];
    diag[..n].copy_from_slice(&coeffs.b);
    offdiag[..n].copy_from_slice(&coeffs.a);
    Ok(TruncatedOperator { diag, offdiag })
}

/// All eigenvalues, ascending, by the implicit-shift QL iteration.
pub fn tridiag_eigenvalues(op: &TruncatedOperator) -> Vec<f64> {
    let n = op.diag.len();
    let mut d = op.diag.clone();
    let mut e = op.offdiag.clone();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                // fall back to bisection for anything QL could not settle
                let mut vals: Vec<f64> = (0..n).map(|k| op.eigenvalue_by_bisection(k)).collect();
                vals.sort_by(f64::total_cmp);
                return vals;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Eigenvalues of the `size`-section outside `[-2 - margin, 2 + margin]`,
/// ascending. Only those eigenvalues are located (Sturm counts + bisection).
pub fn eigenvalues_outside_band(coeffs: &JacobiCoefficients, size: usize, margin: f64) -> Result<Vec<f64>> {
    if !(margin > 0.0) {
        return Err(Error::Parameter(format!("margin must be positive, got {margin}")));
    }
    let op = truncate(coeffs, size)?;
    let below = op.count_below(-2.0 - margin);
    let up_to = op.count_below(2.0 + margin);
    let mut out: Vec<f64> = (0..below).map(|k| op.eigenvalue_by_bisection(k)).collect();
    out.extend((up_to..size).map(|k| op.eigenvalue_by_bisection(k)));
    // an eigenvalue sitting exactly on +2+margin is counted as inside
    out.retain(|x| x.abs() > 2.0 + margin);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn assemble_reverses_and_scales() {
        let smp = TridiagonalSample { s: vec![3.0], t: vec![] };
        let c = assemble_coupled(&smp, 2.0, 0.5).unwrap();
        assert_eq!(c.a, vec![0.5]);
        assert_eq!(c.b, vec![6.0]);

        let smp = TridiagonalSample {
            s: vec![0.1, 0.2, 0.3],
            t: vec![1.5, 2.5],
        };
        let c = assemble_coupled(&smp, 1.0, 1.0).unwrap();
        assert_eq!(c.a, vec![2.5, 1.5, 1.0]);
        assert_eq!(c.b, vec![0.3, 0.2, 0.1]);

        let c = assemble_coupled(&smp, -1.0, 1.0).unwrap();
        assert_eq!(c.a, vec![2.5, 1.5, 1.0]);
        assert_eq!(c.b, vec![-0.3, -0.2, -0.1]);
    }

    #[test]
    fn assemble_rejects_bad_kappa() {
        let smp = TridiagonalSample { s: vec![3.0], t: vec![] };
        assert!(matches!(assemble_coupled(&smp, 1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(assemble_coupled(&smp, 1.0, -1.0), Err(Error::Parameter(_))));
        assert!(assemble_coupled(&smp, 0.0, 1.0).is_err());
    }

    #[test]
    fn negative_gamma_matches_sign_flipped_matrix() {
        // γ = -1 applied literally gives off-diagonals -t; the gauge choice
        // uses +t. Both sections must share a spectrum.
        let smp = TridiagonalSample {
            s: vec![0.4, -1.1, 0.9],
            t: vec![0.8, 1.7],
        };
        let c = assemble_coupled(&smp, -1.0, 0.6).unwrap();
        let gauge = truncate(&c, 12).unwrap();
        let mut literal = gauge.clone();
        literal.offdiag[0] = -1.7;
        literal.offdiag[1] = -0.8;
        let x = tridiag_eigenvalues(&gauge);
        let y = tridiag_eigenvalues(&literal);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_layout() {
        let op = truncate(&JacobiCoefficients::free(2), 5).unwrap();
        assert_eq!(op.diag, vec![0.0; 5]);
        assert_eq!(op.offdiag, vec![1.0; 4]);
        let c = JacobiCoefficients::new(vec![1.0], vec![2.0]).unwrap();
        let op = truncate(&c, 3).unwrap();
        assert_eq!(op.diag, vec![2.0, 0.0, 0.0]);
        assert_eq!(op.offdiag, vec![1.0, 1.0]);
        assert!(matches!(truncate(&c, 1), Err(Error::Size(_))));
    }

    #[test]
    fn small_spectra() {
        let one = TruncatedOperator {
            diag: vec![2.0],
            offdiag: vec![],
        };
        assert_eq!(tridiag_eigenvalues(&one), vec![2.0]);
        let two = TruncatedOperator {
            diag: vec![0.0, 0.0],
            offdiag: vec![1.0],
        };
        let e = tridiag_eigenvalues(&two);
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_section_spectrum() {
        for size in [5usize, 40, 300] {
            let op = truncate(&JacobiCoefficients::free(1), size).unwrap();
            let e = tridiag_eigenvalues(&op);
            let mut exact: Vec<f64> = (1..=size)
                .map(|k| 2.0 * (std::f64::consts::PI * k as f64 / (size + 1) as f64).cos())
                .collect();
            exact.sort_by(f64::total_cmp);
            for (x, y) in e.iter().zip(&exact) {
                assert!((x - y).abs() < 1e-10 * 2.0);
            }
            for k in [0, size / 2, size - 1] {
                assert!((op.eigenvalue_by_bisection(k) - exact[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outside_band_examples() {
        let free = JacobiCoefficients::free(3);
        assert!(eigenvalues_outside_band(&free, 200, 1e-6).unwrap().is_empty());

        let c = JacobiCoefficients::new(vec![1.0], vec![2.5]).unwrap();
        let e = eigenvalues_outside_band(&c, 2000, DEFAULT_MARGIN).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0] - 2.9).abs() < 1e-6);

        let c = JacobiCoefficients::new(vec![1.0], vec![0.5]).unwrap();
        assert!(eigenvalues_outside_band(&c, 2000, DEFAULT_MARGIN).unwrap().is_empty());
    }

    #[test]
    fn perturbation_order() {
        assert_eq!(JacobiCoefficients::free(4).perturbation_order(), 0);
        let c = JacobiCoefficients::new(vec![3.0, 1.0], vec![2.0, 0.0]).unwrap();
        assert_eq!(c.perturbation_order(), 2);
        let c = JacobiCoefficients::new(vec![3.0, 1.0], vec![2.0, 0.5]).unwrap();
        assert_eq!(c.perturbation_order(), 3);
        let c = JacobiCoefficients::new(vec![3.0, 0.5], vec![2.0, 0.0]).unwrap();
        assert_eq!(c.perturbation_order(), 4);
    }

    #[test]
    fn validation_reports_index() {
        let err = JacobiCoefficients::new(vec![1.0, -2.0], vec![0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("a[1]"));
        assert!(JacobiCoefficients::new(vec![1.0], vec![0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn prefix_property(a in proptest::collection::vec(0.1f64..3.0, 1..6), size in 8usize..30) {
            let b: Vec<f64> = a.iter().map(|x| x - 1.0).collect();
            let c = JacobiCoefficients::new(a, b).unwrap();
            let x = truncate(&c, size).unwrap();
            let y = truncate(&c, size + 1).unwrap();
            prop_assert_eq!(&x.diag[..], &y.diag[..size]);
            prop_assert_eq!(&x.offdiag[..], &y.offdiag[..size - 1]);
        }

        #[test]
        fn gauge_invariance(a in proptest::collection::vec(0.1f64..3.0, 1..6),
                            b in proptest::collection::vec(-3.0f64..3.0, 6),
                            flip in 0usize..6) {
            let n = a.len();
            let c = JacobiCoefficients::new(a, b[..n].to_vec()).unwrap();
            let op = truncate(&c, 30).unwrap();
            let mut flipped = op.clone();
            let j = flip % n;
            flipped.offdiag[j] = -flipped.offdiag[j];
            let x = tridiag_eigenvalues(&op);
            let y = tridiag_eigenvalues(&flipped);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-10 * 4.0);
            }
        }

        #[test]
        fn ql_agrees_with_bisection(d in proptest::collection::vec(-3.0f64..3.0, 2..20),
                                    o in proptest::collection::vec(-2.0f64..2.0, 20)) {
            let n = d.len();
            let op = TruncatedOperator { diag: d, offdiag: o[..n - 1].to_vec() };
            let e = tridiag_eigenvalues(&op);
            for (k, x) in e.iter().enumerate() {
                prop_assert!((op.eigenvalue_by_bisection(k) - x).abs() < 1e-10 * 5.0);
            }
        }
    }
}
