//! Fixtures shared by the benchmarks: one sampled path and the pieces of a
//! single adaptive step built from it.

use sheq_core::adaptive::{DenseStepSolver, PreconditionedOperator};
use sheq_core::grid::TimeGrid;
use sheq_core::linear::run_linear;
use sheq_core::noise::{CovarianceSpec, NoisePath};
use sheq_core::spectral::Nonlinearity;
use sheq_core::Result;

pub const SEED: u64 = 7;

/// A path with `k` modes and `steps` steps on `[0, 1]`, trace class of order `beta`.
pub fn path(k: usize, steps: usize, beta: f64) -> Result<NoisePath> {
    let spec = CovarianceSpec::new(2.0 * beta - 0.8, k, beta)?;
    Ok(NoisePath::sample(&spec, &TimeGrid::new(1.0, steps)?, SEED))
}

/// Everything needed to time one nonlinear step on level `j`.
pub struct StepFixture {
    pub op: PreconditionedOperator,
    pub dense: DenseStepSolver,
    pub v_prev: Vec<f64>,
    pub w: Vec<f64>,
}

impl StepFixture {
    pub fn new(j: u32, steps: usize) -> Result<Self> {
        let p = path(256, steps, 1.0)?;
        let tau = p.grid().tau();
        let states = run_linear(p.grid(), &p, j)?.states;
        let dense = DenseStepSolver::new(j, tau, Nonlinearity::Sine)?;
        let vbar = dense.run(&vec![0.0; states[0].len()], &states[..=steps / 2])?;
        Ok(Self {
            op: PreconditionedOperator::new(j, tau)?,
            dense,
            v_prev: vbar[steps / 2 - 1].clone(),
            w: states[steps / 2].clone(),
        })
    }
}
