//! Symmetric tridiagonal matrices and their Cholesky (LDL^T) factorization.

use crate::error::{Result, SheqError};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(SheqError::DimensionMismatch {
                expected: diag.len().saturating_sub(1),
                got: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    /// Constant-coefficient matrix of size `n`.
    pub fn toeplitz(n: usize, d: f64, o: f64) -> Self {
        Self {
            diag: vec![d; n],
            off: vec![o; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * x[i] * x[i];
            if i + 1 < n {
                s += 2.0 * self.off[i] * x[i] * x[i + 1];
            }
        }
        s
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SymTridiag) -> SymTridiag {
        assert_eq!(self.dim(), other.dim());
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    pub fn factorize(&self) -> Result<TridiagCholesky> {
        TridiagCholesky::new(self)
    }
}

/// `A = L D L^T` with unit lower bidiagonal `L`.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagCholesky {
    pub fn new(a: &SymTridiag) -> Result<Self> {
        let n = a.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = a.diag[0];
        for i in 0..n {
            if i > 0 {
                l[i - 1] = a.off[i - 1] / d[i - 1];
                d[i] = a.diag[i] - l[i - 1] * a.off[i - 1];
            }
            if !(d[i] > 0.0) || !d[i].is_finite() {
                return Err(SheqError::NotPositiveDefinite { row: i, pivot: d[i] });
            }
        }
        Ok(Self { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_matches_dense() {
        let a = SymTridiag::new(vec![4.0, 5.0, 6.0, 3.0], vec![1.0, -2.0, 0.5]).unwrap();
        let f = a.factorize().unwrap();
        let b = vec![1.0, 2.0, -1.0, 0.25];
        let x = f.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (xi, di) in x.iter().zip(dense.iter()) {
            assert!((xi - di).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = SymTridiag::new(vec![1.0, 1.0], vec![2.0]).unwrap();
        assert!(matches!(
            a.factorize(),
            Err(SheqError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn quad_form_consistent() {
        let a = SymTridiag::toeplitz(5, 2.0, -1.0);
        let x = [1.0, -0.5, 0.25, 2.0, 1.0];
        let ax = a.matvec(&x);
        let dot: f64 = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert!((dot - a.quad_form(&x)).abs() < 1e-14);
    }
}
