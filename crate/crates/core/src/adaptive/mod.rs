//! Adaptive wavelet solver for the nonlinear step equation
//! `v + tau A v - tau f(v + w_J^n) = v^{n-1}`.
//!
//! Unknowns are diagonally preconditioned wavelet coefficients on a tree.
//! Each iteration applies the operator exactly, evaluates the nonlinearity
//! through its nodal interpolant on the finest level, coarsens the residual
//! and takes a damped Richardson step. Termination is certified by the
//! strong monotonicity of the residual map.

mod dense;
mod nonlinear;
mod operator;
mod solve;

pub use dense::DenseStepSolver;
pub use nonlinear::{eval_nonlinear, eval_nonlinear_counted, residual_res, StepProblem};
pub use operator::{
    apply_operator, apply_operator_counted, expanded_tree, stiffness_scaling_constant,
    PreconditionedOperator, CALIBRATION_LEVEL,
};
pub use solve::{
    certificate_constant, run_nonlinear, solve_step, step_vbar, write_stats_csv, NonlinearRun,
    SolverSettings, StepOutput, StepStats, ToleranceSchedule, SAFETY,
};
