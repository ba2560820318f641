//! Dense reference solver for the interpolated step equation.

use crate::error::{Result, SheqError};
use crate::spectral::Nonlinearity;
use crate::tridiag::{SymTridiag, TridiagCholesky};
use crate::wavelet::{gram_matrix, stiffness_matrix};

const DENSE_TOL: f64 = 1e-14;
const DENSE_MAX_ITERS: usize = 5000;

/// Fixed-point solver for `(M + tau S) c - tau M g(c + w) = M c_prev`.
///
/// The iteration contracts with factor `sqrt(3) tau L < 1` in the `M` norm.
#[derive(Debug, Clone)]
pub struct DenseStepSolver {
    j: u32,
    tau: f64,
    nonlinearity: Nonlinearity,
    mass: SymTridiag,
    chol: TridiagCholesky,
}

impl DenseStepSolver {
    pub fn new(j: u32, tau: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        let product = tau * nonlinearity.lipschitz();
        if product >= 0.5 {
            return Err(SheqError::StepRestriction { product });
        }
        let mass = gram_matrix(j)?;
        let chol = mass.add_scaled(tau, &stiffness_matrix(j)?).factorize()?;
        Ok(Self {
            j,
            tau,
            nonlinearity,
            mass,
            chol,
        })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    /// Nodal solution and iteration count.
    pub fn step(&self, c_prev: &[f64], w: &[f64], guess: &[f64]) -> Result<(Vec<f64>, usize)> {
        let dim = self.mass.dim();
        for len in [c_prev.len(), w.len(), guess.len()] {
            if len != dim {
                return Err(SheqError::DimensionMismatch {
                    expected: dim,
                    got: len,
                });
            }
        }
        let base = self.mass.matvec(c_prev);
        let mut c = guess.to_vec();
        let mut g = vec![0.0; dim];
        let mut rhs = vec![0.0; dim];
        for it in 1..=DENSE_MAX_ITERS {
            for ((gi, ci), wi) in g.iter_mut().zip(&c).zip(w) {
                *gi = self.tau * self.nonlinearity.eval(ci + wi);
            }
            self.mass.matvec_into(&g, &mut rhs);
            rhs.iter_mut().zip(&base).for_each(|(r, b)| *r += b);
            self.chol.solve_in_place(&mut rhs);
            let diff: Vec<f64> = rhs.iter().zip(&c).map(|(a, b)| a - b).collect();
            let d = self.mass.quad_form(&diff).sqrt();
            let size = self.mass.quad_form(&rhs).sqrt();
            std::mem::swap(&mut c, &mut rhs);
            if d <= DENSE_TOL * size.max(1e-300) || d == 0.0 || self.nonlinearity == Nonlinearity::Zero {
                return Ok((c, it));
            }
        }
        Err(SheqError::NoConvergence {
            iterations: DENSE_MAX_ITERS,
            residual: f64::NAN,
        })
    }

    /// Trajectory from nodal `v0` driven by `w[1..]`.
    pub fn run(&self, v0: &[f64], w: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![v0.to_vec()];
        for (n, wn) in w.iter().enumerate().skip(1) {
            let prev = &out[n - 1];
            let (c, _) = self.step(prev, wn, prev).map_err(|e| e.at_step(n))?;
            out.push(c);
        }
        Ok(out)
    }

    /// `L2` norm of the nodal function `a - b`.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.mass.quad_form(&d).max(0.0).sqrt()
    }
}
