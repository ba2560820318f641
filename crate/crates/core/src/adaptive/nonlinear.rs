//! Nonlinearity evaluation and approximate residuals in wavelet coordinates.
//!
//! `f(u)` is represented by its nodal interpolant on mesh level `J`, so the
//! discrete step equation tested against all hats reads
//! `(M + tau S) c - tau M g(c + w) = M c_prev`.

use crate::error::{Result, SheqError};
use crate::spectral::Nonlinearity;
use crate::wavelet::{coarsen_dense, OpCounter, WaveletCoeffs};

use super::operator::{masked_tree, PreconditionedOperator};

/// Relative rounding floor of a level-`J` evaluation.
const EVAL_FLOOR: f64 = 64.0 * f64::EPSILON;

/// One backward-Euler step `v + tau A v - tau f(v + w) = v_prev` on mesh
/// level `J`, with `v_prev` and `w` given by nodal values.
#[derive(Debug, Clone)]
pub struct StepProblem<'a> {
    op: &'a PreconditionedOperator,
    nonlinearity: Nonlinearity,
    w: &'a [f64],
    rhs: Vec<f64>,
}

impl<'a> StepProblem<'a> {
    pub fn new(
        op: &'a PreconditionedOperator,
        nonlinearity: Nonlinearity,
        v_prev: &[f64],
        w: &'a [f64],
    ) -> Result<Self> {
        let dim = op.dim();
        for len in [v_prev.len(), w.len()] {
            if len != dim {
                return Err(SheqError::DimensionMismatch {
                    expected: dim,
                    got: len,
                });
            }
        }
        let product = op.tau() * nonlinearity.lipschitz();
        if product >= 0.5 {
            return Err(SheqError::StepRestriction { product });
        }
        let load = op.mass().matvec(v_prev);
        let rhs = op.functional_to_wavelet(&load, &mut OpCounter::default())?;
        Ok(Self {
            op,
            nonlinearity,
            w,
            rhs,
        })
    }

    pub fn op(&self) -> &PreconditionedOperator {
        self.op
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn w(&self) -> &[f64] {
        self.w
    }

    /// `D^-1 T^T M v_prev` in flat order.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `D^-1 T^T tau M g(u + w)` in flat order, `u` the nodal values of `y`.
    pub(crate) fn nonlinear_full(&self, y: &WaveletCoeffs, ops: &mut OpCounter) -> Result<Vec<f64>> {
        self.nonlinear_flat(&y.to_dense(self.op.dim())?, ops)
    }

    pub(crate) fn nonlinear_flat(&self, y: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
        let dim = self.op.dim();
        if self.nonlinearity == Nonlinearity::Zero {
            return Ok(vec![0.0; dim]);
        }
        let mut u = self.op.to_nodal_flat(y, ops)?;
        let tau = self.op.tau();
        let g = self.nonlinearity;
        for (ui, wi) in u.iter_mut().zip(self.w) {
            *ui = tau * g.eval(*ui + wi);
        }
        let load = self.op.mass().matvec(&u);
        ops.add(6 * dim as u64);
        self.op.functional_to_wavelet(&load, ops)
    }

    /// Exact residual `B y - F(y) - rhs` in flat order.
    #[cfg(test)]
    pub(crate) fn residual_full(&self, y: &WaveletCoeffs, ops: &mut OpCounter) -> Result<Vec<f64>> {
        let by = self.op.apply_full(y, ops)?;
        let f = self.nonlinear_full(y, ops)?;
        Ok(by
            .iter()
            .zip(&f)
            .zip(&self.rhs)
            .map(|((b, f), r)| b - f - r)
            .collect())
    }
}

fn check_tol(tol: f64, what: &str) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SheqError::InvalidArgument(format!(
            "{what} = {tol} must be positive"
        )));
    }
    Ok(())
}

/// Coarsens a flat vector to `l2` tolerance `tol`; entries outside the kept
/// tree are zeroed in place and the mask is returned.
fn coarsen_in_place(flat: &mut [f64], tol: f64, ops: &mut OpCounter) -> Result<Vec<bool>> {
    let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tol < EVAL_FLOOR * norm {
        return Err(SheqError::RefinementExhausted(format!(
            "tolerance {tol:e} below the rounding floor {:e} of the finest level",
            EVAL_FLOOR * norm
        )));
    }
    let keep = coarsen_dense(flat, tol);
    ops.add(8 * flat.len() as u64);
    flat.iter_mut()
        .zip(&keep)
        .filter(|(_, k)| !**k)
        .for_each(|(v, _)| *v = 0.0);
    Ok(keep)
}

fn coarsen_flat(flat: &[f64], tol: f64, ops: &mut OpCounter) -> Result<WaveletCoeffs> {
    let mut v = flat.to_vec();
    let keep = coarsen_in_place(&mut v, tol, ops)?;
    Ok(masked_tree(&v, &keep))
}

/// Wavelet coefficients of the load of `tau f(v + w)`, coarsened so that the
/// `l2` error against the full level-`J` evaluation is at most `tol`.
pub fn eval_nonlinear(problem: &StepProblem<'_>, y: &WaveletCoeffs, tol: f64) -> Result<WaveletCoeffs> {
    eval_nonlinear_counted(problem, y, tol, &mut OpCounter::default())
}

pub fn eval_nonlinear_counted(
    problem: &StepProblem<'_>,
    y: &WaveletCoeffs,
    tol: f64,
    ops: &mut OpCounter,
) -> Result<WaveletCoeffs> {
    check_tol(tol, "tolerance")?;
    if problem.nonlinearity() == Nonlinearity::Zero {
        return Ok(WaveletCoeffs::new_tree());
    }
    let full = problem.nonlinear_full(y, ops)?;
    coarsen_flat(&full, tol, ops)
}

/// Tree-supported approximation of `B y - F(y) - rhs` with `l2` error at
/// most `eta`: half of it goes to the nonlinearity, half to the final
/// coarsening; the operator part is applied exactly.
pub fn residual_res(eta: f64, problem: &StepProblem<'_>, y: &WaveletCoeffs) -> Result<WaveletCoeffs> {
    residual_res_counted(eta, problem, y, &mut OpCounter::default())
}

/// Exact pieces of the residual at one iterate.
pub(crate) struct ResidualParts {
    /// `B y - rhs`.
    linear: Vec<f64>,
    /// `F(y)`.
    nonlinear: Vec<f64>,
    pub exact_norm: f64,
}

impl ResidualParts {
    /// `y` in flat order.
    pub(crate) fn new(problem: &StepProblem<'_>, y: &[f64], ops: &mut OpCounter) -> Result<Self> {
        let mut linear = problem.op().apply_flat(y, ops)?;
        linear.iter_mut().zip(problem.rhs()).for_each(|(b, g)| *b -= g);
        let nonlinear = problem.nonlinear_flat(y, ops)?;
        let exact_norm = linear
            .iter()
            .zip(&nonlinear)
            .map(|(l, f)| (l - f) * (l - f))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            linear,
            nonlinear,
            exact_norm,
        })
    }

    /// RES output for tolerance `eta` in flat order, with its tree mask.
    pub(crate) fn coarsened(&self, eta: f64, ops: &mut OpCounter) -> Result<(Vec<f64>, Vec<bool>)> {
        check_tol(eta, "eta")?;
        let dim = self.linear.len();
        if self.exact_norm == 0.0 {
            return Ok((vec![0.0; dim], vec![false; dim]));
        }
        let mut r = self.linear.clone();
        if self.nonlinear.iter().any(|v| *v != 0.0) {
            let mut f = self.nonlinear.clone();
            coarsen_in_place(&mut f, 0.5 * eta, ops)?;
            r.iter_mut().zip(&f).for_each(|(a, b)| *a -= b);
        }
        let keep = coarsen_in_place(&mut r, 0.5 * eta, ops)?;
        Ok((r, keep))
    }
}

fn residual_res_counted(
    eta: f64,
    problem: &StepProblem<'_>,
    y: &WaveletCoeffs,
    ops: &mut OpCounter,
) -> Result<WaveletCoeffs> {
    check_tol(eta, "eta")?;
    if !y.is_tree() {
        return Err(SheqError::NotATree("RES input is not tree-flagged".into()));
    }
    let flat = y.to_dense(problem.op().dim())?;
    let (r, keep) = ResidualParts::new(problem, &flat, ops)?.coarsened(eta, ops)?;
    Ok(masked_tree(&r, &keep))
}
