//! Zeros of `L*`: root finding, conjugate canonicalization, eigenvalue versus
//! resonance labels, the Joukowsky map and the admissible-configuration
//! predicate.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::RealPolynomial;

pub const ABERTH_MAX_ITER: usize = 500;
pub const ABERTH_TOL: f64 = 1e-13;
/// Realness snap, relative to `max(1, |z|)`.
pub const REAL_SNAP_TOL: f64 = 1e-8;
/// Roots closer than this to the origin are dropped.
pub const ORIGIN_TOL: f64 = 1e-10;
/// Two points closer than this count as one repeated point.
pub const MULTIPLICITY_RADIUS: f64 = 1e-7;
/// Membership tolerance used by the density and the sampling pipeline.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

fn residual_bound(p: &RealPolynomial, z: Complex64) -> f64 {
    let norm: f64 = p.coeffs().iter().map(|c| c.abs()).sum();
    1e-9 * norm * z.norm().max(1.0).powi(p.degree() as i32)
}

/// All complex roots of `p`, with multiplicity.
///
/// Exact zero trailing coefficients are split off as roots at the origin.
/// Degrees one and two use closed forms; higher degrees use Aberth–Ehrlich
/// simultaneous iteration followed by a Newton polish.
pub fn polynomial_roots(p: &RealPolynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() || p.degree() == 0 {
        return Err(Error::Parameter("root finding needs degree at least 1".into()));
    }
    let zeros_at_origin = p.coeffs().iter().take_while(|&&c| c == 0.0).count();
    let lead = p.leading();
    let q = RealPolynomial::new(p.coeffs()[zeros_at_origin..].iter().map(|c| c / lead).collect());
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    match q.degree() {
        0 => {}
        1 => roots.push(Complex64::new(-q.coeff(0), 0.0)),
        2 => roots.extend(quadratic_roots(q.coeff(1), q.coeff(0))),
        _ => roots.extend(aberth(&q)?),
    }
    Ok(roots)
}

/// Roots of `z² + b z + c` without cancellation.
fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let q = -0.5 * (b + s.copysign(b));
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        [Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn horner_with_derivative(p: &RealPolynomial, z: Complex64) -> (Complex64, Complex64) {
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    for &c in p.coeffs().iter().rev() {
        der = der * z + val;
        val = val * z + c;
    }
    (val, der)
}

fn aberth(p: &RealPolynomial) -> Result<Vec<Complex64>> {
    let m = p.degree();
    let radius = (1.0 + p.coeff(m - 1).abs()).max(p.coeff(0).abs().powf(1.0 / m as f64));
    let mut z: Vec<Complex64> = (0..m)
        .map(|i| {
            // angular jitter keeps the start off the real axis symmetry
            let theta = 2.0 * std::f64::consts::PI * i as f64 / m as f64 + 0.4 + 0.01 * i as f64;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = false;
    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for i in 0..m {
            let (val, der) = horner_with_derivative(p, z[i]);
            if val == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = val / der;
            let repulsion: Complex64 = (0..m).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if max_step <= ABERTH_TOL {
            converged = true;
            break;
        }
    }

    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (val, der) = horner_with_derivative(p, *zi);
            if der == Complex64::new(0.0, 0.0) {
                break;
            }
            let cand = *zi - val / der;
            if horner_with_derivative(p, cand).0.norm() < val.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }

    if !converged {
        if let Some(bad) = z.iter().find(|&&zi| p.eval_complex(zi).norm() >= residual_bound(p, zi)) {
            return Err(Error::Numerical(format!(
                "Aberth iteration did not converge in {ABERTH_MAX_ITER} steps (root estimate {bad})"
            )));
        }
    }
    Ok(z)
}

/// Eigenvalue (outside the closed unit disk) or resonance (inside it, origin excluded).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    Eigenvalue,
    Resonance,
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Eigenvalue => "eigenvalue",
            Self::Resonance => "resonance",
        })
    }
}

pub fn label_of(z: Complex64) -> PointLabel {
    if z.norm() > 1.0 {
        PointLabel::Eigenvalue
    } else {
        PointLabel::Resonance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub z: Complex64,
    pub label: PointLabel,
}

/// Conjugation-closed multiset of nonzero points: `L` real points and `M`
/// conjugate pairs, each pair stored once by its upper-half-plane member.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfiguration {
    reals: Vec<f64>,
    pairs: Vec<Complex64>,
    origin_drops: usize,
}

impl SpectrumConfiguration {
    /// Build directly from real points and upper-half-plane pair members.
    pub fn from_parts(mut reals: Vec<f64>, pairs: Vec<Complex64>) -> Result<Self> {
        if reals.iter().any(|r| !r.is_finite() || *r == 0.0) {
            return Err(Error::Validation("real points must be finite and nonzero".into()));
        }
        let mut pairs: Vec<Complex64> = pairs.into_iter().map(|z| Complex64::new(z.re, z.im.abs())).collect();
        if pairs.iter().any(|z| !z.is_finite() || z.im == 0.0) {
            return Err(Error::Validation("pair members must be finite and non-real".into()));
        }
        reals.sort_by(f64::total_cmp);
        pairs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        Ok(Self {
            reals,
            pairs,
            origin_drops: 0,
        })
    }

    pub fn reals(&self) -> &[f64] {
        &self.reals
    }

    /// Upper-half-plane members of the conjugate pairs.
    pub fn pairs(&self) -> &[Complex64] {
        &self.pairs
    }

    pub fn origin_drops(&self) -> usize {
        self.origin_drops
    }

    /// `L`, the number of real points.
    pub fn real_count(&self) -> usize {
        self.reals.len()
    }

    /// `M`, the number of conjugate pairs.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn len(&self) -> usize {
        self.reals.len() + 2 * self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points: reals ascending, then each pair as `z, z̄`.
    pub fn points(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.reals.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        for z in &self.pairs {
            out.push(*z);
            out.push(z.conj());
        }
        out
    }

    /// `Π z_j`, real by construction.
    pub fn product(&self) -> f64 {
        self.reals.iter().product::<f64>() * self.pairs.iter().map(|z| z.norm_sqr()).product::<f64>()
    }

    /// `Σ z_j`, real by construction.
    pub fn sum(&self) -> f64 {
        self.reals.iter().sum::<f64>() + self.pairs.iter().map(|z| 2.0 * z.re).sum::<f64>()
    }

    /// `Σ z_j²`, real by construction.
    pub fn sum_squares(&self) -> f64 {
        self.reals.iter().map(|r| r * r).sum::<f64>()
            + self.pairs.iter().map(|z| 2.0 * (z.re * z.re - z.im * z.im)).sum::<f64>()
    }

    pub fn conjugate(&self) -> Self {
        // storage is already conjugation-closed
        self.clone()
    }
}

/// Snap near-real roots to the real line, pair the rest into exact conjugates
/// and drop roots at the origin.
pub fn canonicalize_conjugates(roots: &[Complex64], tol: f64) -> Result<SpectrumConfiguration> {
    let mut reals = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut origin_drops = 0;
    for &z in roots {
        if !z.is_finite() {
            return Err(Error::Numerical(format!("non-finite root {z}")));
        }
        if z.norm() < ORIGIN_TOL {
            origin_drops += 1;
        } else if z.im.abs() < tol * z.norm().max(1.0) {
            reals.push(z.re);
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    if upper.len() != lower.len() {
        return Err(Error::Asymmetry(format!(
            "{} roots above the real axis but {} below",
            upper.len(),
            lower.len()
        )));
    }
    let mut pairs = Vec::with_capacity(upper.len());
    for z in upper {
        let (idx, dist) = lower
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (z - w.conj()).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("equal counts");
        if dist > 1e-6 * z.norm().max(1.0) {
            return Err(Error::Asymmetry(format!("root {z} has no conjugate partner")));
        }
        let w = lower.swap_remove(idx);
        pairs.push((z + w.conj()) * 0.5);
    }
    let mut cfg = SpectrumConfiguration::from_parts(reals, pairs)?;
    cfg.origin_drops = origin_drops;
    Ok(cfg)
}

/// Label every point: eigenvalue iff `|z| > 1`.
pub fn classify(config: &SpectrumConfiguration) -> Vec<LabeledPoint> {
    config
        .points()
        .into_iter()
        .map(|z| LabeledPoint { z, label: label_of(z) })
        .collect()
}

pub fn joukowsky(z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("the Joukowsky map is undefined at 0".into()));
    }
    Ok(z + z.inv())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Outside,
    Inside,
}

/// Solution of `z + 1/z = e` on the requested side of the unit circle.
pub fn inverse_joukowsky(e: Complex64, branch: Branch) -> Complex64 {
    let root = (e * e - 4.0).sqrt();
    let z1 = 0.5 * (e + root);
    let z2 = 0.5 * (e - root);
    let big = if z1.norm() >= z2.norm() { z1 } else { z2 };
    match branch {
        Branch::Outside => big,
        // the two solutions are reciprocal; dividing avoids cancellation
        Branch::Inside => big.inv(),
    }
}

/// Clauses of the admissible-configuration definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SClause {
    /// wrong number of points
    Count,
    /// (i) conjugate closure
    ConjugateClosure,
    /// (ii) points outside the open disk are real and simple
    OutsideRealSimple,
    /// (iii)(a) even count on `(1/x_1, 1]`
    PositiveEdgeParity,
    /// (iii)(b) odd count on `(1/x_{m+1}, 1/x_m)`
    PositiveGapParity,
    /// (iii)(c) no point at `1/x_m`
    PositiveReciprocal,
    /// (iv)(a) even count on `[-1, 1/y_1)`
    NegativeEdgeParity,
    /// (iv)(b) odd count on `(1/y_m, 1/y_{m+1})`
    NegativeGapParity,
    /// (iv)(c) no point at `1/y_m`
    NegativeReciprocal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub violated: Option<SClause>,
    pub detail: String,
}

impl Membership {
    fn pass() -> Self {
        Self {
            member: true,
            violated: None,
            detail: String::new(),
        }
    }

    fn fail(clause: SClause, detail: String) -> Self {
        Self {
            member: false,
            violated: Some(clause),
            detail,
        }
    }
}

/// Whether `config` is an admissible eigenvalue/resonance configuration of a
/// rank-`k` perturbation. `tol` is the relative tolerance for "equal to a
/// reciprocal" and for realness.
pub fn is_in_s(k: usize, config: &SpectrumConfiguration, tol: f64) -> Membership {
    if config.len() != k {
        return Membership::fail(SClause::Count, format!("{} points, expected {k}", config.len()));
    }
    // (i): pairs are stored once, so closure can only fail through a
    // degenerate pair member
    if let Some(z) = config.pairs.iter().find(|z| !(z.im > 0.0)) {
        return Membership::fail(SClause::ConjugateClosure, format!("pair member {z} is not in the upper half-plane"));
    }
    // (ii)
    if let Some(z) = config.pairs.iter().find(|z| z.norm() >= 1.0 + tol) {
        return Membership::fail(SClause::OutsideRealSimple, format!("non-real point {z} outside the unit disk"));
    }
    let reals = &config.reals;
    for w in reals.windows(2) {
        if w[0].abs() >= 1.0 && w[1].abs() >= 1.0 && (w[1] - w[0]).abs() < MULTIPLICITY_RADIUS * w[0].abs() {
            return Membership::fail(
                SClause::OutsideRealSimple,
                format!("repeated point {} outside the unit disk", w[0]),
            );
        }
    }
    let near = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(1.0);
    let count_in = |pred: &dyn Fn(f64) -> bool| reals.iter().filter(|&&r| pred(r)).count();

    // (iii) positive points beyond 1, ascending
    let xs: Vec<f64> = reals.iter().copied().filter(|&r| r > 1.0).collect();
    if let Some(&x1) = xs.first() {
        let c = count_in(&|r| r > 1.0 / x1 && r <= 1.0);
        if c % 2 != 0 {
            return Membership::fail(SClause::PositiveEdgeParity, format!("{c} points on (1/{x1}, 1]"));
        }
        for w in xs.windows(2) {
            let (lo, hi) = (1.0 / w[1], 1.0 / w[0]);
            let c = count_in(&|r| r > lo && r < hi);
            if c % 2 != 1 {
                return Membership::fail(SClause::PositiveGapParity, format!("{c} points on ({lo}, {hi})"));
            }
        }
        for &x in &xs {
            if let Some(r) = reals.iter().find(|&&r| near(r, 1.0 / x)) {
                return Membership::fail(SClause::PositiveReciprocal, format!("point {r} equals 1/{x}"));
            }
        }
    }

    // (iv) negative points beyond -1, nearest to -1 first
    let ys: Vec<f64> = reals.iter().rev().copied().filter(|&r| r < -1.0).collect();
    if let Some(&y1) = ys.first() {
        let c = count_in(&|r| r >= -1.0 && r < 1.0 / y1);
        if c % 2 != 0 {
            return Membership::fail(SClause::NegativeEdgeParity, format!("{c} points on [-1, 1/{y1})"));
        }
        for w in ys.windows(2) {
            let (lo, hi) = (1.0 / w[0], 1.0 / w[1]);
            let c = count_in(&|r| r > lo && r < hi);
            if c % 2 != 1 {
                return Membership::fail(SClause::NegativeGapParity, format!("{c} points on ({lo}, {hi})"));
            }
        }
        for &y in &ys {
            if let Some(r) = reals.iter().find(|&&r| near(r, 1.0 / y)) {
                return Membership::fail(SClause::NegativeReciprocal, format!("point {r} equals 1/{y}"));
            }
        }
    }
    Membership::pass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        v
    }

    #[test]
    fn roots_examples() {
        let r = sorted_re(polynomial_roots(&RealPolynomial::new(vec![-8.0, -2.0, 1.0])).unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-14 && (r[1] - c(4.0, 0.0)).norm() < 1e-14);

        let r = sorted_re(polynomial_roots(&RealPolynomial::new(vec![0.75, 0.0, 1.0])).unwrap());
        let h = 3f64.sqrt() / 2.0;
        assert!((r[0] - c(0.0, -h)).norm() < 1e-14 && (r[1] - c(0.0, h)).norm() < 1e-14);

        let r = polynomial_roots(&RealPolynomial::new(vec![0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(r, vec![c(0.0, 0.0); 3]);
        assert!(polynomial_roots(&RealPolynomial::one()).is_err());
    }

    #[test]
    fn aberth_on_known_roots() {
        let roots = [-3.0, -1.5, -0.2, 0.4, 1.1, 2.5, 4.0];
        let p = RealPolynomial::from_roots(&roots);
        let mut got: Vec<f64> = polynomial_roots(&p).unwrap().iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(roots) {
            assert!((g - e).abs() < 1e-10, "{got:?}");
        }
        // z^4 + 1: four roots on the unit circle
        let r = polynomial_roots(&RealPolynomial::new(vec![1.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(r.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12 && (z.powi(4) + 1.0).norm() < 1e-12));
    }

    #[test]
    fn canonicalize_examples() {
        let cfg = canonicalize_conjugates(&[c(4.0, 0.0), c(-2.0, 0.0)], REAL_SNAP_TOL).unwrap();
        assert_eq!((cfg.real_count(), cfg.pair_count()), (2, 0));

        let cfg = canonicalize_conjugates(&[c(0.1, 0.9), c(0.1, -0.9 + 1e-12)], REAL_SNAP_TOL).unwrap();
        assert_eq!((cfg.real_count(), cfg.pair_count()), (0, 1));
        let pts = cfg.points();
        assert_eq!(pts[0], pts[1].conj());

        let cfg = canonicalize_conjugates(&[c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)], REAL_SNAP_TOL).unwrap();
        assert_eq!(cfg.reals(), &[0.5]);
        assert_eq!(cfg.origin_drops(), 2);

        assert!(matches!(
            canonicalize_conjugates(&[c(0.1, 0.9), c(0.3, -0.5)], REAL_SNAP_TOL),
            Err(Error::Asymmetry(_))
        ));
        assert!(matches!(
            canonicalize_conjugates(&[c(0.1, 0.9)], REAL_SNAP_TOL),
            Err(Error::Asymmetry(_))
        ));
    }

    #[test]
    fn classify_examples() {
        let labels = |cfg: &SpectrumConfiguration| classify(cfg).iter().map(|p| p.label).collect::<Vec<_>>();
        let cfg = SpectrumConfiguration::from_parts(vec![4.0, -2.0], vec![]).unwrap();
        assert_eq!(labels(&cfg), vec![PointLabel::Eigenvalue; 2]);
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![c(0.0, 0.866)]).unwrap();
        assert_eq!(labels(&cfg), vec![PointLabel::Resonance; 2]);
        let cfg = SpectrumConfiguration::from_parts(vec![2.0, 0.5], vec![]).unwrap();
        assert_eq!(labels(&cfg), vec![PointLabel::Resonance, PointLabel::Eigenvalue]);
        // the unit circle belongs to the resonances
        assert_eq!(label_of(c(-1.0, 0.0)), PointLabel::Resonance);
    }

    #[test]
    fn joukowsky_examples() {
        assert_eq!(joukowsky(c(4.0, 0.0)).unwrap(), c(4.25, 0.0));
        assert_eq!(joukowsky(c(-2.0, 0.0)).unwrap(), c(-2.5, 0.0));
        assert!(matches!(joukowsky(c(0.0, 0.0)), Err(Error::Domain(_))));
        let out = inverse_joukowsky(c(2.9, 0.0), Branch::Outside);
        let ins = inverse_joukowsky(c(2.9, 0.0), Branch::Inside);
        assert!((out - c(2.5, 0.0)).norm() < 1e-14);
        assert!((ins - c(0.4, 0.0)).norm() < 1e-14);
        let neg = inverse_joukowsky(c(-2.5, 0.0), Branch::Outside);
        assert!((neg - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn membership_examples() {
        let cfg = SpectrumConfiguration::from_parts(vec![4.0, -2.0], vec![]).unwrap();
        assert!(is_in_s(2, &cfg, MEMBERSHIP_TOL).member);
        let cfg = SpectrumConfiguration::from_parts(vec![], vec![c(0.0, 0.866)]).unwrap();
        assert!(is_in_s(2, &cfg, MEMBERSHIP_TOL).member);
        let cfg = SpectrumConfiguration::from_parts(vec![2.0, 2.0], vec![]).unwrap();
        let v = is_in_s(2, &cfg, MEMBERSHIP_TOL);
        assert!(!v.member);
        assert_eq!(v.violated, Some(SClause::OutsideRealSimple));
    }

    #[test]
    fn membership_clauses() {
        let check = |reals: Vec<f64>, pairs: Vec<Complex64>| {
            let cfg = SpectrumConfiguration::from_parts(reals, pairs).unwrap();
            is_in_s(cfg.len(), &cfg, MEMBERSHIP_TOL).violated
        };
        assert_eq!(check(vec![2.0, 0.7], vec![]), Some(SClause::PositiveEdgeParity));
        assert_eq!(check(vec![2.0, 0.7, 0.8], vec![]), None);
        assert_eq!(check(vec![2.0, 0.5], vec![]), Some(SClause::PositiveReciprocal));
        // x = 2, 4: one point required in (1/4, 1/2)
        assert_eq!(check(vec![2.0, 4.0], vec![]), Some(SClause::PositiveGapParity));
        assert_eq!(check(vec![2.0, 4.0, 0.3], vec![]), None);
        assert_eq!(check(vec![-2.0, -0.7], vec![]), Some(SClause::NegativeEdgeParity));
        assert_eq!(check(vec![-2.0, -4.0], vec![]), Some(SClause::NegativeGapParity));
        assert_eq!(check(vec![-2.0, -4.0, -0.3], vec![]), None);
        assert_eq!(check(vec![-2.0, -0.5], vec![]), Some(SClause::NegativeReciprocal));
        assert_eq!(check(vec![], vec![c(1.5, 0.5)]), Some(SClause::OutsideRealSimple));
        let cfg = SpectrumConfiguration::from_parts(vec![0.5], vec![]).unwrap();
        assert_eq!(is_in_s(2, &cfg, MEMBERSHIP_TOL).violated, Some(SClause::Count));
    }

    proptest! {
        #[test]
        fn roots_reproduce_coefficients(c in proptest::collection::vec(-3.0f64..3.0, 2..12)) {
            let mut c = c;
            c.push(1.0);
            let p = RealPolynomial::new(c);
            let roots = polynomial_roots(&p).unwrap();
            prop_assert_eq!(roots.len(), p.degree());
            // expand Π (z - r) in complex arithmetic
            let mut e = vec![Complex64::new(1.0, 0.0)];
            for r in &roots {
                let mut next = vec![Complex64::new(0.0, 0.0); e.len() + 1];
                for (i, ei) in e.iter().enumerate() {
                    next[i + 1] += ei;
                    next[i] -= ei * r;
                }
                e = next;
            }
            let scale = 1.0 + p.norm_inf();
            for (i, ei) in e.iter().enumerate() {
                prop_assert!((ei - p.coeff(i)).norm() < 1e-8 * scale, "coeff {} {} vs {}", i, ei, p.coeff(i));
            }
        }

        #[test]
        fn joukowsky_round_trip(re in -6.0f64..6.0, im in -6.0f64..6.0) {
            let e = Complex64::new(re, im);
            for br in [Branch::Outside, Branch::Inside] {
                let z = inverse_joukowsky(e, br);
                prop_assert!((joukowsky(z).unwrap() - e).norm() < 1e-9 * (1.0 + e.norm()));
                match br {
                    Branch::Outside => prop_assert!(z.norm() >= 1.0 - 1e-12),
                    Branch::Inside => prop_assert!(z.norm() <= 1.0 + 1e-12),
                }
            }
        }
    }
}
