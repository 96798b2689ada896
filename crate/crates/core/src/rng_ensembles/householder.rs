use num_complex::Complex64;

use super::TridiagonalSample;
use crate::error::{Error, Result};

/// Dense Hermitian matrix, row-major. Real symmetric matrices are stored with
/// zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl HermitianMatrix {
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Size(format!("expected {} entries, got {}", n * n, data.len())));
        }
        let m = Self { n, data };
        let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..n {
            for j in i..n {
                if (m.get(i, j) - m.get(j, i).conj()).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::Validation(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn from_real(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(n, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Unitary reduction to real symmetric tridiagonal form by Householder
/// reflections acting on rows/columns `2..n`, so the first basis vector is
/// fixed. Complex phases of the sub-diagonal are absorbed by a diagonal unitary,
/// leaving `t_j = |e_j| ≥ 0`.
pub fn householder_tridiagonalize(matrix: &HermitianMatrix) -> Result<TridiagonalSample> {
    let n = matrix.n;
    let mut a = matrix.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let zero = Complex64::new(0.0, 0.0);

    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| a[idx(i, k)]).collect();
        let tail_norm2: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail_norm2 == 0.0 {
            continue;
        }
        let norm = (x[0].norm_sqr() + tail_norm2).sqrt();
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * norm;
        let mut v = x;
        v[0] -= beta;
        let v_norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / v_norm2;
        let m = n - k - 1;

        // p = τ B v on the trailing block B = a[k+1.., k+1..]
        let mut p = vec![zero; m];
        for (r, pr) in p.iter_mut().enumerate() {
            let mut acc = zero;
            for (c, vc) in v.iter().enumerate() {
                acc += a[idx(k + 1 + r, k + 1 + c)] * vc;
            }
            *pr = acc * tau;
        }
        // K = τ/2 · v* p is real for Hermitian B
        let vp: Complex64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let kk = 0.5 * tau * vp.re;
        let w: Vec<Complex64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kk).collect();
        for r in 0..m {
            for c in 0..m {
                a[idx(k + 1 + r, k + 1 + c)] -= v[r] * w[c].conj() + w[r] * v[c].conj();
            }
        }
        a[idx(k + 1, k)] = beta;
        a[idx(k, k + 1)] = beta.conj();
        for i in k + 2..n {
            a[idx(i, k)] = zero;
            a[idx(k, i)] = zero;
        }
    }

    let s = (0..n).map(|i| a[idx(i, i)].re).collect();
    let t = (0..n.saturating_sub(1)).map(|k| a[idx(k + 1, k)].norm()).collect();
    Ok(TridiagonalSample { s, t })
}
