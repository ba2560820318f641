//! Damped Richardson iteration with certified stopping, and the time loop.

use std::io::Write;

use serde::Serialize;

use crate::error::{Result, SheqError};
use crate::grid::TimeGrid;
use crate::spectral::Nonlinearity;
use crate::wavelet::{coarsen_dense, OpCounter, WaveletCoeffs};

use super::nonlinear::{ResidualParts, StepProblem};
use super::operator::{masked_tree, PreconditionedOperator};

/// Safety factor on measured eigenvalue and Riesz constant estimates.
pub const SAFETY: f64 = 1.1;

/// Per-step tolerances `eps_1..eps_N` in `L2` and the decay factor of the
/// inner residual tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSchedule {
    eps: Vec<f64>,
    eta_rule: f64,
}

impl ToleranceSchedule {
    pub fn new(eps: Vec<f64>, eta_rule: f64) -> Result<Self> {
        if eps.is_empty() {
            return Err(SheqError::InvalidArgument("empty tolerance schedule".into()));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(SheqError::InvalidArgument(format!(
                "tolerance {e} must be positive"
            )));
        }
        if !(eta_rule > 0.0 && eta_rule < 1.0) {
            return Err(SheqError::InvalidArgument(format!(
                "eta decay factor {eta_rule} outside (0, 1)"
            )));
        }
        Ok(Self { eps, eta_rule })
    }

    /// `eps_n = total / N` for every step.
    pub fn uniform(total: f64, steps: usize, eta_rule: f64) -> Result<Self> {
        Self::new(vec![total / steps as f64; steps], eta_rule)
    }

    pub fn eps(&self, n: usize) -> f64 {
        self.eps[n - 1]
    }

    pub fn steps(&self) -> usize {
        self.eps.len()
    }

    pub fn eta_rule(&self) -> f64 {
        self.eta_rule
    }

    pub fn total(&self) -> f64 {
        self.eps.iter().sum()
    }
}

/// Outcome of one adaptive solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepStats {
    pub eps_n: f64,
    pub support_size: usize,
    pub iterations: usize,
    pub op_count: u64,
    /// `|r~| + eta` at termination.
    pub achieved_residual: f64,
    /// Certified `L2` error bound of the returned iterate.
    pub error_bound: f64,
}

/// Iteration limits of [`solve_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Coarsen the iterate every this many iterations.
    pub coarsen_every: usize,
    /// Periodic coarsening tolerance relative to the current error bound.
    pub coarsen_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            coarsen_every: 5,
            coarsen_fraction: 0.25,
        }
    }
}

/// `(1 - sqrt(3) tau L) sqrt(b_min / 1.1)`: a residual `r` certifies
/// `|u - u*|_{L2} <= |r| / this`.
///
/// The interpolated nonlinearity satisfies `|I_J (g(a) - g(b))| <= sqrt(3) L |a - b|`
/// in `L2`, which makes the residual map strongly monotone in the energy norm
/// of `I + tau A`.
pub fn certificate_constant(op: &PreconditionedOperator, nonlinearity: Nonlinearity) -> f64 {
    let tl = op.tau() * nonlinearity.lipschitz();
    (1.0 - 3f64.sqrt() * tl) * (op.spectrum().0 / SAFETY).sqrt()
}

/// Solves the step problem to `L2` accuracy `eps` against the exact
/// level-`J` solution, starting from `init` (preconditioned coordinates).
///
/// The iteration stops once the certified bound is below `eps / 2`; the
/// iterate is then coarsened by `(eps / 2) / sqrt(1.1 riesz_upper)` in `l2`.
pub fn solve_step(
    problem: &StepProblem<'_>,
    init: &WaveletCoeffs,
    eps: f64,
    eta_rule: f64,
    settings: &SolverSettings,
) -> Result<(WaveletCoeffs, StepStats)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SheqError::InvalidArgument(format!(
            "eps = {eps} must be positive"
        )));
    }
    let op = problem.op();
    let mu = certificate_constant(op, problem.nonlinearity());
    let target = 0.5 * eps;
    let eta_floor = 0.1 * target * mu;
    let (_, b_max) = op.spectrum();
    let mut ops = OpCounter::default();
    let dim = op.dim();
    let mut y = init.to_dense(dim)?;
    let mut keep = vec![false; dim];
    for (idx, _) in init.iter() {
        for a in std::iter::once(*idx).chain(idx.ancestors()) {
            keep[a.flat()] = true;
        }
    }
    let mut omega = op.omega();
    let mut eta0: Option<f64> = None;
    let mut last_norm = f64::INFINITY;
    let mut rises = 0;
    let mut it = 0;
    let (bound, achieved) = loop {
        let parts = ResidualParts::new(problem, &y, &mut ops)?;
        let exact_norm = parts.exact_norm;
        let e0 = *eta0.get_or_insert(exact_norm);
        let eta = (e0 * eta_rule.powi(it as i32))
            .min(0.5 * exact_norm)
            .max(eta_floor);
        let (r, r_keep) = parts.coarsened(eta, &mut ops)?;
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let achieved = r_norm + eta;
        let bound = achieved / mu;
        if bound <= target {
            break (bound, achieved);
        }
        if it >= settings.max_iterations {
            return Err(SheqError::NoConvergence {
                iterations: it,
                residual: exact_norm,
            });
        }
        if exact_norm > last_norm {
            rises += 1;
            if rises >= 3 {
                omega *= 0.5;
                rises = 0;
            }
        } else {
            rises = 0;
        }
        last_norm = exact_norm;
        for ((yi, ri), (k, rk)) in y.iter_mut().zip(&r).zip(keep.iter_mut().zip(&r_keep)) {
            if *rk {
                *yi -= omega * ri;
                *k = true;
            }
        }
        ops.add(2 * r_keep.iter().filter(|k| **k).count() as u64);
        it += 1;
        if settings.coarsen_every > 0 && it % settings.coarsen_every == 0 {
            let delta = settings.coarsen_fraction * bound / (SAFETY * b_max).sqrt();
            keep = coarsen_masked(&mut y, &keep, delta, &mut ops);
        }
    };
    let delta = target / (SAFETY * op.riesz_upper()).sqrt();
    let keep = coarsen_masked(&mut y, &keep, delta, &mut ops);
    let out = masked_tree(&y, &keep);
    let stats = StepStats {
        eps_n: eps,
        support_size: out.len(),
        iterations: it,
        op_count: ops.ops,
        achieved_residual: achieved,
        error_bound: bound + delta * (SAFETY * op.riesz_upper()).sqrt(),
    };
    Ok((out, stats))
}

/// Coarsens the masked entries of `y` in place; returns the new mask.
fn coarsen_masked(y: &mut [f64], keep: &[bool], tol: f64, ops: &mut OpCounter) -> Vec<bool> {
    let masked: Vec<f64> = y
        .iter()
        .zip(keep)
        .map(|(v, k)| if *k { *v } else { 0.0 })
        .collect();
    let kept = coarsen_dense(&masked, tol);
    // keep structural zeros of the old support only where the tree needs them
    for (v, k) in y.iter_mut().zip(&kept) {
        if !*k {
            *v = 0.0;
        }
    }
    ops.add(8 * y.len() as u64);
    kept
}

/// Result of [`step_vbar`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Preconditioned wavelet coordinates.
    pub coeffs: WaveletCoeffs,
    /// Nodal values on mesh level `J`.
    pub nodal: Vec<f64>,
    pub stats: StepStats,
}

/// Approximates `v` with `v + tau A v - tau f(v + w) = v_prev` to `L2`
/// accuracy `eps`, warm-started from `init`.
#[allow(clippy::too_many_arguments)]
pub fn step_vbar(
    op: &PreconditionedOperator,
    nonlinearity: Nonlinearity,
    v_prev: &[f64],
    w: &[f64],
    eps: f64,
    init: &WaveletCoeffs,
    eta_rule: f64,
    settings: &SolverSettings,
) -> Result<StepOutput> {
    let problem = StepProblem::new(op, nonlinearity, v_prev, w)?;
    let (coeffs, stats) = solve_step(&problem, init, eps, eta_rule, settings)?;
    let nodal = op.to_nodal(&coeffs)?;
    Ok(StepOutput { coeffs, nodal, stats })
}

/// Trajectories `v_eps^n`, `u_eps^n = v_eps^n + w_J^n` (nodal, level `J`)
/// and per-step statistics.
#[derive(Debug, Clone)]
pub struct NonlinearRun {
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub stats: Vec<StepStats>,
}

/// Iterates [`step_vbar`] over the grid; `v0` holds the nodal values of the
/// projected initial value and `w` the states `w_J^0..w_J^N`.
pub fn run_nonlinear(
    op: &PreconditionedOperator,
    nonlinearity: Nonlinearity,
    v0: &[f64],
    w: &[Vec<f64>],
    grid: &TimeGrid,
    schedule: &ToleranceSchedule,
    settings: &SolverSettings,
) -> Result<NonlinearRun> {
    let steps = grid.steps();
    if (grid.tau() - op.tau()).abs() > 1e-14 * op.tau() {
        return Err(SheqError::InvalidArgument(format!(
            "operator step {} differs from grid step {}",
            op.tau(),
            grid.tau()
        )));
    }
    if w.len() != steps + 1 {
        return Err(SheqError::DimensionMismatch {
            expected: steps + 1,
            got: w.len(),
        });
    }
    if schedule.steps() != steps {
        return Err(SheqError::DimensionMismatch {
            expected: steps,
            got: schedule.steps(),
        });
    }
    let mut v = Vec::with_capacity(steps + 1);
    let mut u = Vec::with_capacity(steps + 1);
    let mut stats = Vec::with_capacity(steps);
    v.push(v0.to_vec());
    u.push(v0.iter().zip(&w[0]).map(|(a, b)| a + b).collect());
    let mut coeffs = WaveletCoeffs::new_tree();
    for n in 1..=steps {
        let out = step_vbar(
            op,
            nonlinearity,
            &v[n - 1],
            &w[n],
            schedule.eps(n),
            &coeffs,
            schedule.eta_rule(),
            settings,
        )
        .map_err(|e| e.at_step(n))?;
        u.push(out.nodal.iter().zip(&w[n]).map(|(a, b)| a + b).collect());
        v.push(out.nodal);
        stats.push(out.stats);
        coeffs = out.coeffs;
    }
    Ok(NonlinearRun { v, u, stats })
}

#[derive(Serialize)]
struct StatsRecord {
    path_id: u64,
    n: usize,
    eps_n: f64,
    support: usize,
    iterations: usize,
    op_count: u64,
    residual: f64,
}

/// Appends one CSV record per step; writes the header when `header` is set.
pub fn write_stats_csv<W: Write>(out: W, header: bool, runs: &[(u64, &[StepStats])]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for (path_id, stats) in runs {
        for (i, s) in stats.iter().enumerate() {
            w.serialize(StatsRecord {
                path_id: *path_id,
                n: i + 1,
                eps_n: s.eps_n,
                support: s.support_size,
                iterations: s.iterations,
                op_count: s.op_count,
                residual: s.achieved_residual,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
