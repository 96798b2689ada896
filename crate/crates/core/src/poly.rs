//! Real polynomials in ascending coefficient order.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coeffs[i]` multiplies `z^i`. Trailing zeros are trimmed, so the zero
/// polynomial has no coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::one(), |acc, &r| acc * Self::new(vec![-r, 1.0]))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficient of `z^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1.0
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `z · p`.
    pub fn shift_up(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.coeffs);
        Self { coeffs: c }
    }

    /// `p / z`; returns the quotient and the discarded constant term.
    pub fn div_by_z(&self) -> (Self, f64) {
        match self.coeffs.split_first() {
            None => (Self::zero(), 0.0),
            Some((c0, rest)) => (Self::new(rest.to_vec()), *c0),
        }
    }

    /// `p / (1 - z²)`; returns the quotient and the largest remainder
    /// coefficient magnitude.
    pub fn div_one_minus_z2(&self) -> (Self, f64) {
        let d = self.coeffs.len();
        if d < 3 {
            return (Self::zero(), self.norm_inf());
        }
        // p_i = q_i - q_{i-2}
        let mut q = vec![0.0; d - 2];
        for i in 0..d - 2 {
            q[i] = self.coeffs[i] + if i >= 2 { q[i - 2] } else { 0.0 };
        }
        let r_hi = |i: usize| self.coeffs[i] + if i >= 2 && i - 2 < q.len() { q[i - 2] } else { 0.0 };
        let rem = r_hi(d - 2).abs().max(r_hi(d - 1).abs());
        (Self::new(q), rem)
    }

    /// Keep only coefficients up to `degree` (drops rounding residue above it).
    pub fn truncated(&self, degree: usize) -> Self {
        Self::new(self.coeffs.iter().take(degree + 1).copied().collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }
}

/// `z^m p(1/z)`, the coefficient vector reversed within length `m + 1`.
pub fn reversal(p: &RealPolynomial, m: usize) -> Result<RealPolynomial> {
    if !p.is_zero() && p.degree() > m {
        return Err(Error::Parameter(format!(
            "reversal length {m} is below the degree {}",
            p.degree()
        )));
    }
    Ok(RealPolynomial::new((0..=m).rev().map(|i| p.coeff(i)).collect()))
}

impl Add for &RealPolynomial {
    type Output = RealPolynomial;

    fn add(self, rhs: &RealPolynomial) -> RealPolynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        RealPolynomial::new((0..len).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &RealPolynomial {
    type Output = RealPolynomial;

    fn sub(self, rhs: &RealPolynomial) -> RealPolynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        RealPolynomial::new((0..len).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Neg for &RealPolynomial {
    type Output = RealPolynomial;

    fn neg(self) -> RealPolynomial {
        self.scale(-1.0)
    }
}

impl Mul for RealPolynomial {
    type Output = RealPolynomial;

    fn mul(self, rhs: RealPolynomial) -> RealPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return RealPolynomial::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        RealPolynomial::new(c)
    }
}
