//! Backward-Euler multiresolution Galerkin solver for the stochastic
//! convolution, its spectral reference and the error functionals.
//!
//! The step `w_J^n + tau A_J w_J^n = w_J^{n-1} + P_J dW^n` is solved in the
//! nodal (scaling) basis of `S_J`: testing against every hat gives
//! `(M + tau S) c^n = M c^{n-1} + b^n` with `b^n_i = (dW^n, phi_{J,i})`.

use crate::error::{Result, SheqError};
use crate::grid::TimeGrid;
use crate::noise::NoisePath;
use crate::spectral::{eigenvalue_unchecked, SpectralField};
use crate::tridiag::{SymTridiag, TridiagCholesky};
use crate::wavelet::{
    gram_matrix, l2_distance_spectral, project_pj, stiffness_matrix, ModeCoupling, FILTER_TABLE_VERSION,
};

/// Factorized `M + tau S` on mesh level `J`.
#[derive(Debug, Clone)]
pub struct LinearStepSystem {
    j: u32,
    tau: f64,
    mass: SymTridiag,
    matrix: SymTridiag,
    chol: TridiagCholesky,
}

impl LinearStepSystem {
    pub fn new(j: u32, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SheqError::InvalidArgument(format!(
                "tau = {tau} must be positive"
            )));
        }
        let mass = gram_matrix(j)?;
        let matrix = mass.add_scaled(tau, &stiffness_matrix(j)?);
        let chol = matrix.factorize()?;
        Ok(Self {
            j,
            tau,
            mass,
            matrix,
            chol,
        })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// `|(M + tau S) x - b|_inf / |b|_inf` for a fixed test load.
    pub fn factorization_residual(&self) -> f64 {
        let b: Vec<f64> = (0..self.dim()).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let x = self.chol.solve(&b);
        let r = self.matrix.matvec(&x);
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        r.iter().zip(&b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / bmax
    }

    /// Solves `(M + tau S) c = M prev + load`.
    pub fn step_w(&self, prev: &[f64], load: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.step_into(prev, load, &mut out)?;
        Ok(out)
    }

    pub fn step_into(&self, prev: &[f64], load: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        for len in [prev.len(), load.len(), out.len()] {
            if len != n {
                return Err(SheqError::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        self.mass.matvec_into(prev, out);
        out.iter_mut().zip(load).for_each(|(o, b)| *o += b);
        self.chol.solve_in_place(out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(SheqError::NonFinite("linear step solution".into()));
        }
        Ok(())
    }
}

/// Nodal vectors `w_J^0, ..., w_J^N` with `w_J^0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrajectory {
    pub level: u32,
    pub states: Vec<Vec<f64>>,
}

fn check_grid(grid: &TimeGrid, path: &NoisePath) -> Result<()> {
    if path.grid() != grid {
        return Err(SheqError::InvalidArgument(format!(
            "noise path grid ({} steps) does not match time grid ({} steps)",
            path.grid().steps(),
            grid.steps()
        )));
    }
    Ok(())
}

/// Runs the multiresolution scheme and hands every state `w_J^n`,
/// `n = 0..=N`, to `visit` without storing the trajectory.
pub fn run_linear_with(
    grid: &TimeGrid,
    path: &NoisePath,
    j: u32,
    mut visit: impl FnMut(usize, &[f64]) -> Result<()>,
) -> Result<()> {
    check_grid(grid, path)?;
    let system = LinearStepSystem::new(j, grid.tau())?;
    let coupling = ModeCoupling::new(j, path.k_modes())?;
    let mut dw = vec![0.0; path.k_modes()];
    let mut prev = vec![0.0; system.dim()];
    let mut next = vec![0.0; system.dim()];
    visit(0, &prev)?;
    for n in 1..=grid.steps() {
        path.increments_into(n, &mut dw);
        let load = coupling.loads(&dw);
        system
            .step_into(&prev, &load, &mut next)
            .map_err(|e| e.at_step(n))?;
        std::mem::swap(&mut prev, &mut next);
        visit(n, &prev)?;
    }
    Ok(())
}

/// Full trajectory of the multiresolution scheme on mesh level `j`.
pub fn run_linear(grid: &TimeGrid, path: &NoisePath, j: u32) -> Result<LinearTrajectory> {
    let mut states = Vec::with_capacity(grid.steps() + 1);
    run_linear_with(grid, path, j, |_, s| {
        states.push(s.to_vec());
        Ok(())
    })?;
    Ok(LinearTrajectory { level: j, states })
}

/// Exact solution of `w^n + tau A w^n = w^{n-1} + dW^n` in the truncated
/// eigenbasis, `w^0 = 0`.
pub fn spectral_discrete_reference(grid: &TimeGrid, path: &NoisePath) -> Result<Vec<SpectralField>> {
    let mut out = Vec::with_capacity(grid.steps() + 1);
    spectral_discrete_reference_with(grid, path, |_, w| {
        out.push(w.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Streaming form of [`spectral_discrete_reference`].
pub fn spectral_discrete_reference_with(
    grid: &TimeGrid,
    path: &NoisePath,
    mut visit: impl FnMut(usize, &SpectralField) -> Result<()>,
) -> Result<()> {
    check_grid(grid, path)?;
    let k = path.k_modes();
    let tau = grid.tau();
    let resolvent: Vec<f64> = (1..=k)
        .map(|i| 1.0 / (1.0 + tau * eigenvalue_unchecked(i)))
        .collect();
    let mut w = SpectralField::zeros(k);
    let mut dw = vec![0.0; k];
    visit(0, &w)?;
    for n in 1..=grid.steps() {
        path.increments_into(n, &mut dw);
        for ((c, r), d) in w.coeffs_mut().iter_mut().zip(&resolvent).zip(&dw) {
            *c = r * (*c + d);
        }
        visit(n, &w)?;
    }
    Ok(())
}

/// Mass matrix and mode coupling for exact `L2` distances between nodal
/// vectors on level `J` and spectral fields with `K` modes.
///
/// Built once per `(J, K)` and shared read-only between workers.
#[derive(Debug, Clone)]
pub struct MrErrorNorm {
    mass: SymTridiag,
    coupling: ModeCoupling,
    basis_version: u32,
}

impl MrErrorNorm {
    pub fn new(j: u32, k_modes: usize) -> Result<Self> {
        Ok(Self {
            mass: gram_matrix(j)?,
            coupling: ModeCoupling::new(j, k_modes)?,
            basis_version: FILTER_TABLE_VERSION,
        })
    }

    pub fn key(&self) -> (u32, usize, u32) {
        (self.coupling.level(), self.coupling.k_modes(), self.basis_version)
    }

    pub fn distance(&self, nodal: &[f64], field: &SpectralField) -> Result<f64> {
        if nodal.len() != self.mass.dim() {
            return Err(SheqError::DimensionMismatch {
                expected: self.mass.dim(),
                got: nodal.len(),
            });
        }
        if field.k_modes() != self.coupling.k_modes() {
            return Err(SheqError::DimensionMismatch {
                expected: self.coupling.k_modes(),
                got: field.k_modes(),
            });
        }
        Ok(l2_distance_spectral(nodal, &self.mass, &self.coupling, field))
    }
}

/// `|w_J^n - w^n|_{L2}` for every step, computed exactly from the mixed Gram identity.
pub fn mr_error(wj: &LinearTrajectory, reference: &[SpectralField]) -> Result<Vec<f64>> {
    if wj.states.len() != reference.len() {
        return Err(SheqError::DimensionMismatch {
            expected: wj.states.len(),
            got: reference.len(),
        });
    }
    let Some(first) = reference.first() else {
        return Ok(Vec::new());
    };
    let norm = MrErrorNorm::new(wj.level, first.k_modes())?;
    wj.states
        .iter()
        .zip(reference)
        .map(|(a, b)| norm.distance(a, b))
        .collect()
}

/// `|w_J^n - w^n|_{L2}` for `n = 0..=N`, running the multiresolution scheme
/// and the spectral reference side by side without storing either.
pub fn mr_error_stream(grid: &TimeGrid, path: &NoisePath, norm: &MrErrorNorm) -> Result<Vec<f64>> {
    check_grid(grid, path)?;
    let (j, k, _) = norm.key();
    if k != path.k_modes() {
        return Err(SheqError::DimensionMismatch {
            expected: k,
            got: path.k_modes(),
        });
    }
    let tau = grid.tau();
    let system = LinearStepSystem::new(j, tau)?;
    let resolvent: Vec<f64> = (1..=k)
        .map(|i| 1.0 / (1.0 + tau * eigenvalue_unchecked(i)))
        .collect();
    let mut w = SpectralField::zeros(k);
    let mut dw = vec![0.0; k];
    let mut prev = vec![0.0; system.dim()];
    let mut next = vec![0.0; system.dim()];
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(0.0);
    for n in 1..=grid.steps() {
        path.increments_into(n, &mut dw);
        let load = norm.coupling.loads(&dw);
        system
            .step_into(&prev, &load, &mut next)
            .map_err(|e| e.at_step(n))?;
        std::mem::swap(&mut prev, &mut next);
        for ((c, r), d) in w.coeffs_mut().iter_mut().zip(&resolvent).zip(&dw) {
            *c = r * (*c + d);
        }
        out.push(norm.distance(&prev, &w)?);
    }
    Ok(out)
}

/// `(tau sum_{n=1}^N |r(tau A_J)^n P_J v - r(tau A)^n v|^2)^(1/2)` with
/// `r(s) = 1 / (1 + s)`.
pub fn resolvent_comparison(v: &SpectralField, tau: f64, steps: usize, j: u32) -> Result<f64> {
    let system = LinearStepSystem::new(j, tau)?;
    let norm = MrErrorNorm::new(j, v.k_modes())?;
    let zero = vec![0.0; system.dim()];
    let mut c = project_pj(v, j)?;
    let mut exact = v.clone();
    let resolvent: Vec<f64> = (1..=v.k_modes())
        .map(|i| 1.0 / (1.0 + tau * eigenvalue_unchecked(i)))
        .collect();
    let mut acc = 0.0;
    for _ in 0..steps {
        c = system.step_w(&c, &zero)?;
        exact
            .coeffs_mut()
            .iter_mut()
            .zip(&resolvent)
            .for_each(|(e, r)| *e *= r);
        acc += norm.distance(&c, &exact)?.powi(2);
    }
    Ok((tau * acc).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::CovarianceSpec;
    use crate::wavelet::l2_distance_fn;

    #[test]
    fn streamed_errors_match_stored_trajectories() {
        let spec = CovarianceSpec::new(1.2, 64, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let path = NoisePath::sample(&spec, &grid, 11);
        let stored = mr_error(
            &run_linear(&grid, &path, 5).unwrap(),
            &spectral_discrete_reference(&grid, &path).unwrap(),
        )
        .unwrap();
        let norm = MrErrorNorm::new(5, 64).unwrap();
        let streamed = mr_error_stream(&grid, &path, &norm).unwrap();
        assert_eq!(stored, streamed);
    }

    #[test]
    fn zero_step_is_zero() {
        let s = LinearStepSystem::new(5, 0.01).unwrap();
        let z = vec![0.0; s.dim()];
        assert_eq!(s.step_w(&z, &z).unwrap(), z);
        assert!(s.factorization_residual() < 1e-10);
        assert!(s.step_w(&z, &z[1..]).is_err());
    }

    #[test]
    fn matches_dense_solve() {
        let s = LinearStepSystem::new(4, 0.03).unwrap();
        let n = s.dim();
        let prev: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let load: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos() * 0.01).collect();
        let got = s.step_w(&prev, &load).unwrap();
        let a = s.matrix().to_dense();
        let rhs = s.mass().to_dense() * nalgebra::DVector::from_vec(prev) + nalgebra::DVector::from_vec(load);
        let want = a.lu().solve(&rhs).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_noise_gives_zero_trajectory() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let path = NoisePath::sample(&CovarianceSpec::zero(32), &grid, 1);
        let traj = run_linear(&grid, &path, 5).unwrap();
        assert_eq!(traj.states.len(), 17);
        assert!(traj.states.iter().all(|s| s.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_step_single_mode_reference() {
        let grid = TimeGrid::new(0.1, 1).unwrap();
        let spec = CovarianceSpec::new(2.0, 4, 0.5).unwrap();
        let path = NoisePath::sample(&spec, &grid, 7);
        let w = spectral_discrete_reference(&grid, &path).unwrap();
        let lam = eigenvalue_unchecked(1);
        let want = (spec.q(1) * 0.1).sqrt() * path.xi_step(1)[0] / (1.0 + 0.1 * lam);
        assert!((w[1].coeffs()[0] - want).abs() < 1e-15);
        let w2 = spectral_discrete_reference(&grid, &path.scaled(2.0)).unwrap();
        assert!(w2[1].sub(&w[1].scale(2.0)).l2_norm() < 1e-15);
    }

    #[test]
    fn mr_error_matches_quadrature() {
        let grid = TimeGrid::new(0.2, 4).unwrap();
        let spec = CovarianceSpec::new(2.0, 64, 0.5).unwrap();
        let path = NoisePath::sample(&spec, &grid, 3);
        let j = 5;
        let wj = run_linear(&grid, &path, j).unwrap();
        let w = spectral_discrete_reference(&grid, &path).unwrap();
        let errs = mr_error(&wj, &w).unwrap();
        assert_eq!(errs[0], 0.0);
        for n in 1..=4 {
            let q = l2_distance_fn(&wj.states[n], j, |x| w[n].eval(x), 8);
            assert!((errs[n] - q).abs() < 1e-8, "{} vs {q}", errs[n]);
        }
        // zero on one side reduces to the norm of the other
        let zeros = LinearTrajectory {
            level: j,
            states: vec![vec![0.0; wj.states[0].len()]; 5],
        };
        let to_ref = mr_error(&zeros, &w).unwrap();
        let mass = gram_matrix(j).unwrap();
        let zero_ref = vec![SpectralField::zeros(64); 5];
        let to_wj = mr_error(&wj, &zero_ref).unwrap();
        for n in 0..=4 {
            assert!((to_ref[n] - w[n].l2_norm()).abs() < 1e-14);
            assert!((to_wj[n] - mass.quad_form(&wj.states[n]).sqrt()).abs() < 1e-14);
        }
        assert!(mr_error(&wj, &w[..3]).is_err());
    }

    #[test]
    fn converges_to_reference_with_level() {
        let grid = TimeGrid::new(0.25, 8).unwrap();
        let spec = CovarianceSpec::new(4.0, 128, 2.0).unwrap();
        let path = NoisePath::sample(&spec, &grid, 11);
        let w = spectral_discrete_reference(&grid, &path).unwrap();
        let errs: Vec<f64> = (4..=8)
            .map(|j| {
                let e = mr_error(&run_linear(&grid, &path, j).unwrap(), &w).unwrap();
                e.into_iter().fold(0.0, f64::max)
            })
            .collect();
        for p in errs.windows(2) {
            assert!(p[1] < p[0]);
        }
    }

    #[test]
    fn resolvent_comparison_rate_two_for_first_mode() {
        let v = SpectralField::mode(8, 1, 1.0);
        let errs: Vec<f64> = (3..=7)
            .map(|j| resolvent_comparison(&v, 0.01, 50, j).unwrap())
            .collect();
        for p in errs.windows(2) {
            let slope = (p[0] / p[1]).log2();
            assert!((slope - 2.0).abs() < 0.15, "{errs:?}");
        }
    }

    #[test]
    fn reproducible() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let spec = CovarianceSpec::new(2.0, 32, 1.0).unwrap();
        let path = NoisePath::sample(&spec, &grid, 5);
        assert_eq!(
            run_linear(&grid, &path, 6).unwrap(),
            run_linear(&grid, &path, 6).unwrap()
        );
    }
}
