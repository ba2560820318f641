//! Eigen-expansion model of the Dirichlet Laplacian on (0, 1).
//!
//! Every function is represented by its first `K` coefficients in the
//! orthonormal eigenbasis `e_k(x) = sqrt(2) sin(k pi x)`, `A e_k = (k pi)^2 e_k`.
//! Fractional powers, the heat semigroup and the backward-Euler resolvent are
//! all diagonal in this basis, which is what makes the model usable as an
//! exact oracle for the wavelet discretizations.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SheqError};
use crate::grid::TimeGrid;
use crate::noise::NoisePath;
use crate::sine::SineTransform;

/// Tolerance of the fixed-point iteration for the implicit Euler step.
pub const IMPLICIT_TOL: f64 = 1e-12;
const MAX_FIXED_POINT_ITERS: usize = 500;

/// `lambda_k = (k pi)^2`.
pub fn eigenvalue(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(SheqError::InvalidArgument("eigenvalue index starts at 1".into()));
    }
    Ok(eigenvalue_unchecked(k))
}

#[inline]
pub(crate) fn eigenvalue_unchecked(k: usize) -> f64 {
    let w = k as f64 * PI;
    w * w
}

/// `e_k(x) = sqrt(2) sin(k pi x)`.
pub fn eval_eigenfunction(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(SheqError::InvalidArgument(
            "eigenfunction index starts at 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(SheqError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    Ok(SQRT_2 * (k as f64 * PI * x).sin())
}

/// Truncated eigen-expansion; `coeffs[k - 1]` multiplies `e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(SheqError::InvalidArgument("truncation level must be >= 1".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SheqError::NonFinite(format!("spectral coefficient {}", i + 1)));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(k_modes: usize) -> Self {
        assert!(k_modes >= 1);
        Self {
            coeffs: vec![0.0; k_modes],
        }
    }

    /// `value * e_k` truncated at `k_modes`.
    pub fn mode(k_modes: usize, k: usize, value: f64) -> Self {
        assert!(k >= 1 && k <= k_modes);
        let mut f = Self::zeros(k_modes);
        f.coeffs[k - 1] = value;
        f
    }

    /// Coefficients of a callable, by Gauss quadrature on a uniform partition.
    pub fn from_fn(k_modes: usize, cells: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut coeffs = vec![0.0; k_modes];
        let h = 1.0 / cells as f64;
        for c in 0..cells {
            for (node, weight) in crate::quadrature::gauss_legendre_on(c as f64 * h, h) {
                let fx = f(node) * weight;
                for (k, coeff) in coeffs.iter_mut().enumerate() {
                    *coeff += fx * SQRT_2 * ((k + 1) as f64 * PI * node).sin();
                }
            }
        }
        Self { coeffs }
    }

    pub fn k_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// L2(0,1) norm; equals the Euclidean norm of the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
            .sum()
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.axpy(-1.0, other)
    }

    /// `self + alpha * other`; the shorter field is zero-padded.
    pub fn axpy(&self, alpha: f64, other: &SpectralField) -> SpectralField {
        let n = self.k_modes().max(other.k_modes());
        let mut coeffs = vec![0.0; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let a = self.coeffs.get(i).copied().unwrap_or(0.0);
            let b = other.coeffs.get(i).copied().unwrap_or(0.0);
            *c = a + alpha * b;
        }
        SpectralField { coeffs }
    }

    pub fn scale(&self, alpha: f64) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// Same field truncated or zero-padded to `k_modes`.
    pub fn resized(&self, k_modes: usize) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(k_modes, 0.0);
        SpectralField { coeffs }
    }

    fn map_modes(&self, mut m: impl FnMut(f64) -> f64) -> SpectralField {
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * m(eigenvalue_unchecked(i + 1)))
                .collect(),
        }
    }
}

/// `A^s field`.
pub fn fractional_apply(s: f64, field: &SpectralField) -> SpectralField {
    field.map_modes(|lam| lam.powf(s))
}

/// `|field|_beta = |A^{beta/2} field|`.
pub fn hdot_norm(beta: f64, field: &SpectralField) -> f64 {
    field
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| eigenvalue_unchecked(i + 1).powf(beta) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// `exp(-t A) field`.
pub fn semigroup_apply(t: f64, field: &SpectralField) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(SheqError::InvalidArgument(format!("semigroup time {t} < 0")));
    }
    Ok(field.map_modes(|lam| (-lam * t).exp()))
}

/// `r(tau A)^n field` with `r(s) = 1 / (1 + s)`.
pub fn euler_rational_apply(tau: f64, n: u32, field: &SpectralField) -> Result<SpectralField> {
    if !(tau > 0.0) {
        return Err(SheqError::InvalidArgument(format!(
            "tau = {tau} must be positive"
        )));
    }
    Ok(field.map_modes(|lam| (1.0 + tau * lam).powi(-(n as i32))))
}

/// `tau sum_{n=1}^{terms} (1 + tau lambda)^(-2n)`, the discrete analogue of
/// `int_0^inf exp(-2 lambda t) dt`.
pub fn euler_square_sum(lambda: f64, tau: f64, terms: usize) -> f64 {
    let r = (1.0 + tau * lambda).powi(-2);
    let mut term = 1.0;
    let mut acc = 0.0;
    for _ in 0..terms {
        term *= r;
        if term == 0.0 {
            break;
        }
        acc += term;
    }
    tau * acc
}

/// Limit of [`euler_square_sum`] as the number of terms grows: `1 / (lambda (2 + tau lambda))`.
pub fn euler_square_sum_limit(lambda: f64, tau: f64) -> f64 {
    1.0 / (lambda * (2.0 + tau * lambda))
}

/// Pointwise globally Lipschitz nonlinearities `f(u)(x) = g(u(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `f = 0`.
    Zero,
    /// `g(u) = sin(u)`, Lipschitz constant 1.
    Sine,
    /// `g(u) = u / (1 + u^2)`, Lipschitz constant 1.
    Rational,
    /// `g(u) = u`, Lipschitz constant 1. Used for consistency checks.
    Linear,
}

impl Nonlinearity {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sine => u.sin(),
            Nonlinearity::Rational => u / (1.0 + u * u),
            Nonlinearity::Linear => u,
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sine | Nonlinearity::Rational | Nonlinearity::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Sine => "sin",
            Nonlinearity::Rational => "rational",
            Nonlinearity::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" | "none" => Ok(Nonlinearity::Zero),
            "sin" | "sine" => Ok(Nonlinearity::Sine),
            "rational" => Ok(Nonlinearity::Rational),
            "linear" => Ok(Nonlinearity::Linear),
            other => Err(SheqError::Config(format!("unknown nonlinearity '{other}'"))),
        }
    }
}

/// Truncation level and nonlinearity of the spectral model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    k_modes: usize,
    lipschitz: f64,
    nonlinearity: Nonlinearity,
    quad: SineTransform,
}

impl ModelParams {
    /// Nonlinear terms are evaluated with the default `2K`-point sine quadrature.
    pub fn new(k_modes: usize, nonlinearity: Nonlinearity) -> Result<Self> {
        Self::with_quadrature(k_modes, nonlinearity, 2 * k_modes)
    }

    /// `quad_order` is the number of quadrature intervals, at least `K + 1`.
    pub fn with_quadrature(k_modes: usize, nonlinearity: Nonlinearity, quad_order: usize) -> Result<Self> {
        if k_modes == 0 {
            return Err(SheqError::InvalidArgument("truncation level must be >= 1".into()));
        }
        if quad_order <= k_modes {
            return Err(SheqError::InvalidArgument(format!(
                "quadrature order {quad_order} must exceed K = {k_modes}"
            )));
        }
        Ok(Self {
            k_modes,
            lipschitz: nonlinearity.lipschitz(),
            nonlinearity,
            quad: SineTransform::new(quad_order),
        })
    }

    pub fn k_modes(&self) -> usize {
        self.k_modes
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    /// `P_K f(u + shift)` by sine quadrature.
    pub fn apply_nonlinearity(&self, u: &SpectralField, shift: Option<&SpectralField>) -> SpectralField {
        let k = self.k_modes;
        if self.nonlinearity == Nonlinearity::Zero {
            return SpectralField::zeros(k);
        }
        let n = self.quad.order();
        let mut c = vec![0.0; n - 1];
        for (i, ci) in c.iter_mut().enumerate().take(k.min(n - 1)) {
            *ci = u.coeffs.get(i).copied().unwrap_or(0.0)
                + shift.and_then(|s| s.coeffs.get(i)).copied().unwrap_or(0.0);
        }
        let mut vals = self.quad.apply(&c);
        let g = self.nonlinearity;
        for v in vals.iter_mut() {
            *v = g.eval(SQRT_2 * *v);
        }
        let proj = self.quad.apply(&vals);
        let scale = SQRT_2 / n as f64;
        SpectralField {
            coeffs: proj[..k].iter().map(|p| p * scale).collect(),
        }
    }

    fn check_step(&self, tau: f64) -> Result<()> {
        let product = tau * self.lipschitz;
        if product >= 0.5 {
            return Err(SheqError::StepRestriction { product });
        }
        Ok(())
    }

    /// Solves `u + tau A u - tau f(u + shift) = rhs` by fixed-point iteration
    /// started at `guess`; returns the solution and the iteration count.
    pub fn implicit_solve(
        &self,
        tau: f64,
        rhs: &SpectralField,
        shift: Option<&SpectralField>,
        guess: &SpectralField,
    ) -> Result<(SpectralField, usize)> {
        self.check_step(tau)?;
        let k = self.k_modes;
        let resolvent: Vec<f64> = (1..=k)
            .map(|i| 1.0 / (1.0 + tau * eigenvalue_unchecked(i)))
            .collect();
        let solve_linear = |forcing: &SpectralField| SpectralField {
            coeffs: (0..k)
                .map(|i| resolvent[i] * (rhs.coeffs[i] + tau * forcing.coeffs.get(i).copied().unwrap_or(0.0)))
                .collect(),
        };
        if self.nonlinearity == Nonlinearity::Zero {
            return Ok((solve_linear(&SpectralField::zeros(k)), 0));
        }
        let mut u = guess.resized(k);
        for it in 1..=MAX_FIXED_POINT_ITERS {
            let next = solve_linear(&self.apply_nonlinearity(&u, shift));
            let diff = next.sub(&u).l2_norm();
            u = next;
            if diff <= IMPLICIT_TOL * u.l2_norm().max(1.0) {
                return Ok((u, it));
            }
        }
        Err(SheqError::NoConvergence {
            iterations: MAX_FIXED_POINT_ITERS,
            residual: f64::NAN,
        })
    }
}

/// Variances and covariance of `(int e^{-lambda (tau - s)} dB(s), B(tau))` over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionMoments {
    /// Variance of the stochastic convolution over the step.
    pub var_conv: f64,
    /// Variance of the plain Brownian increment (`tau`).
    pub var_increment: f64,
    /// Covariance of the two.
    pub cov: f64,
    /// `var_conv - cov^2 / tau`, computed without cancellation.
    pub cond_var: f64,
}

impl ConvolutionMoments {
    pub fn new(lambda: f64, tau: f64) -> Self {
        let x = lambda * tau;
        let (var_conv, cov) = if x == 0.0 {
            (tau, tau)
        } else {
            (-(-2.0 * x).exp_m1() / (2.0 * lambda), -(-x).exp_m1() / lambda)
        };
        let h = if x < 0.05 {
            // series of (1 - e^{-2x})/(2x) - ((1 - e^{-x})/x)^2
            let x2 = x * x;
            const C: [f64; 10] = [
                1.0 / 12.0,
                -1.0 / 12.0,
                17.0 / 360.0,
                -7.0 / 360.0,
                43.0 / 6720.0,
                -107.0 / 60480.0,
                769.0 / 1814400.0,
                -163.0 / 1814400.0,
                4097.0 / 239500800.0,
                -709.0 / 239500800.0,
            ];
            x2 * C.iter().rev().fold(0.0, |acc, c| acc * x + c)
        } else {
            let a = -(-2.0 * x).exp_m1() / (2.0 * x);
            let b = -(-x).exp_m1() / x;
            a - b * b
        };
        Self {
            var_conv,
            var_increment: tau,
            cov,
            cond_var: tau * h,
        }
    }
}

/// Samples the exact stochastic convolution of one step given the per-mode
/// Wiener increments `dw` (with covariance `q_k tau`).
///
/// Returns `w(t_n) = e^{-lambda tau} w(t_{n-1}) + sqrt(q) X` where `X` is drawn
/// from its Gaussian law conditional on the Brownian increment.
pub fn exact_convolution_given_increment<R: Rng + ?Sized>(
    tau: f64,
    prev: &SpectralField,
    dw: &[f64],
    sqrt_q: &[f64],
    rng: &mut R,
) -> Result<SpectralField> {
    if !(tau > 0.0) {
        return Err(SheqError::InvalidArgument(format!(
            "tau = {tau} must be positive"
        )));
    }
    let k = prev.k_modes();
    if dw.len() != k || sqrt_q.len() != k {
        return Err(SheqError::DimensionMismatch {
            expected: k,
            got: dw.len().min(sqrt_q.len()),
        });
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let lam = eigenvalue_unchecked(i + 1);
        let m = ConvolutionMoments::new(lam, tau);
        if m.cond_var < -1e-14 * tau {
            return Err(SheqError::NotPositiveSemidefinite(m.cond_var));
        }
        let z: f64 = rng.sample(StandardNormal);
        let conv = if sqrt_q[i] == 0.0 {
            0.0
        } else {
            // dw = sqrt(q) * B increment
            m.cov / tau * dw[i] + sqrt_q[i] * m.cond_var.max(0.0).sqrt() * z
        };
        out.push((-lam * tau).exp() * prev.coeffs[i] + conv);
    }
    Ok(SpectralField { coeffs: out })
}

/// One exact step of the stochastic convolution together with the Wiener
/// increment it was coupled to. `sqrt_q[k-1] = sqrt(q_k)`.
pub fn exact_convolution_step<R: Rng + ?Sized>(
    tau: f64,
    prev: &SpectralField,
    sqrt_q: &[f64],
    rng: &mut R,
) -> Result<(SpectralField, Vec<f64>)> {
    if !(tau > 0.0) {
        return Err(SheqError::InvalidArgument(format!(
            "tau = {tau} must be positive"
        )));
    }
    let dw: Vec<f64> = sqrt_q
        .iter()
        .map(|s| {
            let z: f64 = rng.sample(StandardNormal);
            s * tau.sqrt() * z
        })
        .collect();
    let w = exact_convolution_given_increment(tau, prev, &dw, sqrt_q, rng)?;
    Ok((w, dw))
}

/// Trajectory of the spectral backward Euler scheme.
#[derive(Debug, Clone)]
pub struct SpectralTrajectory {
    pub states: Vec<SpectralField>,
    pub iterations: Vec<usize>,
}

/// Backward Euler `u^n + tau A u^n = u^{n-1} + tau f(u^n) + dW^n` in the
/// truncated eigenbasis.
pub fn spectral_backward_euler(
    params: &ModelParams,
    grid: &TimeGrid,
    path: &NoisePath,
    u0: &SpectralField,
) -> Result<SpectralTrajectory> {
    check_path(params, grid, path)?;
    let tau = grid.tau();
    params.check_step(tau)?;
    let k = params.k_modes();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut iterations = Vec::with_capacity(grid.steps());
    states.push(u0.resized(k));
    for n in 1..=grid.steps() {
        let prev = &states[n - 1];
        let dw = path.increments(n);
        let rhs = SpectralField {
            coeffs: (0..k).map(|i| prev.coeffs[i] + dw[i]).collect(),
        };
        let (u, its) = params
            .implicit_solve(tau, &rhs, None, prev)
            .map_err(|e| e.at_step(n))?;
        states.push(u);
        iterations.push(its);
    }
    Ok(SpectralTrajectory { states, iterations })
}

fn check_path(params: &ModelParams, grid: &TimeGrid, path: &NoisePath) -> Result<()> {
    if path.grid() != grid {
        return Err(SheqError::InvalidArgument(format!(
            "noise path grid ({} steps) does not match time grid ({} steps)",
            path.grid().steps(),
            grid.steps()
        )));
    }
    if path.k_modes() != params.k_modes() {
        return Err(SheqError::DimensionMismatch {
            expected: params.k_modes(),
            got: path.k_modes(),
        });
    }
    Ok(())
}

/// Minimum ratio between the reference grid and the study grid.
pub const MIN_REFERENCE_FACTOR: usize = 16;

/// Fine-grid proxy for the mild solution, sampled at the nodes of `study_path`.
///
/// `fine_path` must be a refinement of `study_path` by at least
/// [`MIN_REFERENCE_FACTOR`], obtained from it by bridge refinement (checked
/// by summing fine increments back to the coarse ones).
pub fn mild_reference(
    params: &ModelParams,
    study_path: &NoisePath,
    fine_path: &NoisePath,
    u0: &SpectralField,
) -> Result<Vec<SpectralField>> {
    let factor = study_path.check_refines_to(fine_path)?;
    if factor < MIN_REFERENCE_FACTOR {
        return Err(SheqError::InconsistentRefinement(format!(
            "reference grid only {factor}x finer than the study grid (need >= {MIN_REFERENCE_FACTOR})"
        )));
    }
    let traj = spectral_backward_euler(params, fine_path.grid(), fine_path, u0)?;
    Ok(traj.states.into_iter().step_by(factor).collect())
}
