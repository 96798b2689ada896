//! Geronimo–Case recursion for the reversed perturbation determinants `L*_j`
//! and their companions `K_j`, plus its exact inverse.
//!
//! One step per Jacobi index `k`:
//!
//! ```text
//! L*_{2k+1} = z L*_{2k} - b_{k+1} K_{2k}          K_{2k+1} = K_{2k}
//! L*_{2k+2} = z L*_{2k+1} - (a_{k+1}² - 1) K_{2k+1}
//! K_{2k+2}  = z L*_{2k+1} + K_{2k+1}
//! ```
//!
//! starting from `L*_0 = K_0 = 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_model::JacobiCoefficients;
use crate::poly::{reversal, RealPolynomial};

/// Relative tolerance for exact-in-theory divisions.
pub const REMAINDER_TOL: f64 = 1e-9;
/// `gc_inverse` rejects `a² = 1 - L*(0)` below this.
pub const MIN_A_SQUARED: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GCSequence {
    /// `lstar[j]` is `L*_j`, monic of degree `j`.
    pub lstar: Vec<RealPolynomial>,
    /// `k[j]` is `K_j`, monic of degree `2⌊j/2⌋` with `K_j(0) = 1`.
    pub k: Vec<RealPolynomial>,
}

impl GCSequence {
    pub fn last_lstar(&self) -> &RealPolynomial {
        self.lstar.last().expect("sequence always holds L*_0")
    }
}

/// One odd step: `(L*_{2k}, K_{2k}, b) -> L*_{2k+1}`.
pub fn step_b(lstar: &RealPolynomial, k: &RealPolynomial, b: f64) -> RealPolynomial {
    &lstar.shift_up() - &k.scale(b)
}

/// One even step: `(L*_{2k+1}, K_{2k+1}, a) -> (L*_{2k+2}, K_{2k+2})`.
pub fn step_a(lstar: &RealPolynomial, k: &RealPolynomial, a: f64) -> (RealPolynomial, RealPolynomial) {
    let zl = lstar.shift_up();
    (&zl - &k.scale(a * a - 1.0), &zl + k)
}

pub fn gc_forward(coeffs: &JacobiCoefficients) -> Result<GCSequence> {
    coeffs.validate()?;
    if coeffs.n() == 0 {
        return Err(Error::Parameter("need at least one Jacobi coefficient".into()));
    }
    let n = coeffs.n();
    let mut lstar = Vec::with_capacity(2 * n + 1);
    let mut k = Vec::with_capacity(2 * n + 1);
    lstar.push(RealPolynomial::one());
    k.push(RealPolynomial::one());
    for j in 0..n {
        let l_odd = step_b(&lstar[2 * j], &k[2 * j], coeffs.b[j]);
        let k_odd = k[2 * j].clone();
        let (l_even, k_even) = step_a(&l_odd, &k_odd, coeffs.a[j]);
        lstar.push(l_odd);
        k.push(k_odd);
        lstar.push(l_even);
        k.push(k_even);
    }
    Ok(GCSequence { lstar, k })
}

/// `K_{2k}` from a monic `L*_m` of degree `m ∈ {2k, 2k+1}`:
/// `(L_m - z^{2 - m mod 2} L*_m) / (1 - z²)` with `L_m = z^m L*_m(1/z)`.
pub fn k_from_lstar(lstar: &RealPolynomial) -> Result<RealPolynomial> {
    if !lstar.is_monic() {
        return Err(Error::Inconsistent(format!(
            "L* must be monic, leading coefficient is {}",
            lstar.leading()
        )));
    }
    let m = lstar.degree();
    if m == 0 {
        return Ok(RealPolynomial::one());
    }
    let rev = reversal(lstar, m)?;
    let shifted = if m.is_multiple_of(2) {
        lstar.shift_up().shift_up()
    } else {
        lstar.shift_up()
    };
    let (q, rem) = (&rev - &shifted).div_one_minus_z2();
    let scale = 1.0 + lstar.norm_inf();
    if rem > REMAINDER_TOL * scale {
        return Err(Error::Inconsistent(format!(
            "division by 1 - z^2 leaves remainder {rem:e}"
        )));
    }
    Ok(q.truncated(2 * (m / 2)))
}

/// Recover `(a, b)` from a monic `L*_{2n}` by running the recursion downward.
pub fn gc_inverse(lstar_2n: &RealPolynomial) -> Result<JacobiCoefficients> {
    if !lstar_2n.is_monic() {
        return Err(Error::InvalidConfiguration("L* must be monic".into()));
    }
    let deg = lstar_2n.degree();
    if deg == 0 || deg % 2 == 1 {
        return Err(Error::InvalidConfiguration(format!(
            "L* must have positive even degree, got {deg}"
        )));
    }
    let n = deg / 2;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut l_even = lstar_2n.clone();
    let invalid = |what: String| Error::InvalidConfiguration(what);

    for k in (0..n).rev() {
        let scale = 1.0 + l_even.norm_inf();
        let k_even = k_from_lstar(&l_even).map_err(|e| invalid(e.to_string()))?;
        let a2 = 1.0 - l_even.coeff(0);
        if a2 < MIN_A_SQUARED {
            return Err(invalid(format!("step {}: a^2 = {a2:e} is not positive", k + 1)));
        }
        // K_{2k+2} - L*_{2k+2} = a² K_{2k+1}; its two top coefficients cancel
        let diff = &k_even - &l_even;
        let top = diff.coeff(2 * k + 2).abs().max(diff.coeff(2 * k + 1).abs());
        if top > REMAINDER_TOL * scale {
            return Err(invalid(format!("step {}: K - L* keeps degree, residue {top:e}", k + 1)));
        }
        let k_odd = diff.truncated(2 * k).scale(1.0 / a2);

        let (l_odd, r0) = (&l_even + &k_odd.scale(a2 - 1.0)).div_by_z();
        if r0.abs() > REMAINDER_TOL * scale {
            return Err(invalid(format!("step {}: division by z leaves {r0:e}", k + 1)));
        }
        let l_odd = l_odd.truncated(2 * k + 1);
        let bk = -l_odd.coeff(0);
        let (l_next, r1) = (&l_odd + &k_odd.scale(bk)).div_by_z();
        if r1.abs() > REMAINDER_TOL * scale {
            return Err(invalid(format!("step {}: division by z leaves {r1:e}", k + 1)));
        }
        a[k] = a2.sqrt();
        b[k] = bk;
        // pin the leading coefficient; the check above bounds the drift
        let mut c = l_next.truncated(2 * k).coeffs().to_vec();
        c.resize(2 * k + 1, 0.0);
        c[2 * k] = 1.0;
        l_even = RealPolynomial::new(c);
    }
    if l_even != RealPolynomial::one() {
        return Err(invalid(format!("final L*_0 = {:?} is not 1", l_even.coeffs())));
    }
    refine(lstar_2n, &mut a, &mut b);
    JacobiCoefficients::new(a, b)
}

/// Lower coefficients `u_0, …, u_{2n-1}` of `L*_{2n}` and their derivatives
/// with respect to `(a_1, …, a_n, b_1, …, b_n)`, by forward-mode
/// differentiation of the recursion.
pub fn forward_tangents(a: &[f64], b: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.len();
    let d = 2 * n + 1;
    let p = 2 * n;
    let shift = |v: &mut Vec<f64>| {
        v.rotate_right(1);
        v[0] = 0.0;
    };
    let mut l = vec![0.0; d];
    l[0] = 1.0;
    let mut k = l.clone();
    let mut dl = vec![vec![0.0; d]; p];
    let mut dk = vec![vec![0.0; d]; p];
    for j in 0..n {
        shift(&mut l);
        for q in 0..p {
            shift(&mut dl[q]);
            for i in 0..d {
                dl[q][i] -= b[j] * dk[q][i];
            }
        }
        for i in 0..d {
            dl[n + j][i] -= k[i];
            l[i] -= b[j] * k[i];
        }

        let c = a[j] * a[j] - 1.0;
        shift(&mut l);
        for q in 0..p {
            shift(&mut dl[q]);
            for i in 0..d {
                let (zl, kk) = (dl[q][i], dk[q][i]);
                dl[q][i] = zl - c * kk;
                dk[q][i] = zl + kk;
            }
        }
        for i in 0..d {
            dl[j][i] -= 2.0 * a[j] * k[i];
            let (zl, kk) = (l[i], k[i]);
            l[i] = zl - c * kk;
            k[i] = zl + kk;
        }
    }
    let jac = DMatrix::from_fn(p, p, |r, q| dl[q][r]);
    l.truncate(p);
    (l, jac)
}

/// A few Newton steps on the forward map, kept only while the coefficient
/// residual shrinks.
fn refine(target: &RealPolynomial, a: &mut [f64], b: &mut [f64]) {
    let n = a.len();
    let residual = |a: &[f64], b: &[f64]| {
        let (u, jac) = forward_tangents(a, b);
        let r = DVector::from_fn(2 * n, |i, _| u[i] - target.coeff(i));
        (r.amax(), r, jac)
    };
    let (mut rn, mut r, mut jac) = residual(a, b);
    for _ in 0..4 {
        if rn == 0.0 {
            break;
        }
        let Some(step) = jac.clone().lu().solve(&r) else { break };
        let na: Vec<f64> = (0..n).map(|j| a[j] - step[j]).collect();
        let nb: Vec<f64> = (0..n).map(|j| b[j] - step[n + j]).collect();
        if na.iter().any(|x| !(*x > 0.0)) || nb.iter().any(|x| !x.is_finite()) {
            break;
        }
        let (cand_rn, cand_r, cand_jac) = residual(&na, &nb);
        if !(cand_rn < rn) {
            break;
        }
        a.copy_from_slice(&na);
        b.copy_from_slice(&nb);
        (rn, r, jac) = (cand_rn, cand_r, cand_jac);
    }
}
