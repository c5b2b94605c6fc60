//! Dense Hermitian factorization used by the Bergman models and solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Condition number above which a Gram matrix is treated as singular.
pub const COND_LIMIT: f64 = 1e14;

/// Eigendecomposition of the diagonally equilibrated matrix
/// `S = D^{-1/2} Q D^{-1/2} = U Λ U*` of a Hermitian positive matrix `Q`.
#[derive(Clone, Debug)]
pub struct HermitianFactor {
    /// `D^{-1/2}`
    scale: DVector<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<Complex64>,
}

/// Why a factorization was rejected, with the indices most responsible.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorFailure {
    pub reason: String,
    pub indices: Vec<usize>,
}

impl HermitianFactor {
    pub fn new(q: &DMatrix<Complex64>) -> Result<Self, FactorFailure> {
        let n = q.nrows();
        let bad: Vec<usize> = (0..n)
            .filter(|&i| {
                let d = q[(i, i)].re;
                !(d.is_finite() && d > 0.0)
            })
            .collect();
        if !bad.is_empty() {
            return Err(FactorFailure {
                reason: "non-positive or non-finite diagonal Gram entries".into(),
                indices: bad,
            });
        }
        let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / q[(i, i)].re.sqrt()));
        let mut s = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * (scale[i] * scale[j]));
        let sa = s.adjoint();
        s = (s + sa) * Complex64::new(0.5, 0.0);
        if s.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(FactorFailure {
                reason: "non-finite Gram entries".into(),
                indices: Vec::new(),
            });
        }
        let eig = s.symmetric_eigen();
        let f = HermitianFactor {
            scale,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        };
        let (lo, hi) = f.extreme_eigenvalues();
        if !(lo > 0.0) || hi / lo > COND_LIMIT {
            return Err(FactorFailure {
                reason: if lo > 0.0 {
                    format!("condition number {:.3e} exceeds {COND_LIMIT:.0e}", hi / lo)
                } else {
                    format!("smallest eigenvalue {lo:.3e} is not positive")
                },
                indices: f.weakest_directions(),
            });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    fn extreme_eigenvalues(&self) -> (f64, f64) {
        let lo = self.eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.eigvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Condition number of the equilibrated matrix.
    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self.extreme_eigenvalues();
        hi / lo
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.extreme_eigenvalues().0
    }

    /// Indices carrying most of the eigenvector of the smallest eigenvalue.
    fn weakest_directions(&self) -> Vec<usize> {
        let (imin, _) = self
            .eigvals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap_or((0, &0.0));
        let v = self.eigvecs.column(imin);
        let vmax = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        (0..v.len()).filter(|&i| v[i].norm() >= 0.3 * vmax).collect()
    }

    /// `U g(Λ) U*` scaled back by `D^{-1/2}` on both sides.
    fn spectral(&self, g: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let u = &self.eigvecs;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..n {
            let gk = g(self.eigvals[k]);
            for j in 0..n {
                let b = u[(j, k)].conj() * gk;
                for i in 0..n {
                    m[(i, j)] += u[(i, k)] * b;
                }
            }
        }
        DMatrix::from_fn(n, n, |i, j| m[(i, j)] * (self.scale[i] * self.scale[j]))
    }

    /// `Q^{-1}`.
    pub fn inverse(&self) -> DMatrix<Complex64> {
        let mut m = self.spectral(|l| 1.0 / l);
        hermitize(&mut m);
        m
    }

    /// A matrix `F` with `F* Q F = I` (`F = D^{-1/2} U Λ^{-1/2} U*`).
    pub fn orthonormalizer(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let u = &self.eigvecs;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..n {
            let gk = 1.0 / self.eigvals[k].sqrt();
            for j in 0..n {
                let b = u[(j, k)].conj() * gk;
                for i in 0..n {
                    m[(i, j)] += u[(i, k)] * b;
                }
            }
        }
        DMatrix::from_fn(n, n, |i, j| m[(i, j)] * self.scale[i])
    }

    /// Solve `Q x = b`.
    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let sb = DVector::from_fn(b.len(), |i, _| b[i] * self.scale[i]);
        let mut y = self.eigvecs.adjoint() * sb;
        for k in 0..y.len() {
            y[k] /= self.eigvals[k];
        }
        let x = &self.eigvecs * y;
        DVector::from_fn(x.len(), |i, _| x[i] * self.scale[i])
    }
}

pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// `x* A y`.
pub fn quad_form(a: &DMatrix<Complex64>, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    x.dotc(&(a * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> DMatrix<Complex64> {
        // A* A + diag, badly scaled rows
        let a = DMatrix::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 * 0.1 + 1.0, (i as f64 - j as f64) * 0.2));
        let mut q = a.adjoint() * &a;
        for i in 0..4 {
            q[(i, i)] += c(0.5, 0.0);
        }
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(1e3, 0.0), c(1e-3, 0.0), c(7.0, 0.0)]));
        &d * q * &d
    }

    #[test]
    fn inverse_and_orthonormalizer() {
        let q = sample();
        let f = HermitianFactor::new(&q).unwrap();
        let inv = f.inverse();
        let id = &q * &inv;
        // entries of Q Q^{-1} inherit the row/column scaling d_i / d_j
        let d = [1.0, 1e3, 1e-3, 7.0];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(e, 0.0)).norm() < 1e-10 * d[i] / d[j]);
            }
        }
        let t = f.orthonormalizer();
        let g = t.adjoint() * &q * &t;
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - c(e, 0.0)).norm() < 1e-10);
            }
        }
        let b = DVector::from_vec(vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.0), c(0.5, 0.5)]);
        let x = f.solve(&b);
        assert!((&x - &inv * &b).norm() < 1e-10 * x.norm());
    }

    #[test]
    fn rejects_singular() {
        let mut q = DMatrix::from_element(3, 3, c(1.0, 0.0));
        q[(2, 2)] = c(2.0, 0.0);
        let err = HermitianFactor::new(&q).unwrap_err();
        assert!(err.indices.contains(&0) && err.indices.contains(&1));
        let mut z = DMatrix::identity(2, 2);
        z[(1, 1)] = c(0.0, 0.0);
        assert_eq!(HermitianFactor::new(&z).unwrap_err().indices, vec![1]);
    }
}
