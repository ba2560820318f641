//! Galerkin matrices, projectors and mixed inner products on mesh `2^-J`.

use std::f64::consts::{PI, SQRT_2};

use super::eval::eval_nodal;
use super::index::space_dim;
use crate::error::{Result, SheqError};
use crate::quadrature::gauss_legendre_on;
use crate::sine::SineTransform;
use crate::spectral::{eigenvalue_unchecked, SpectralField};
use crate::tridiag::SymTridiag;

/// Approximation order of the piecewise-linear spaces.
pub const ORDER: u32 = 2;

/// The space `S_J` of continuous piecewise-linear functions on mesh `2^-J`
/// vanishing at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiresSpace {
    j: u32,
}

impl MultiresSpace {
    pub fn new(j: u32) -> Result<Self> {
        check_level(j)?;
        Ok(Self { j })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn dim(&self) -> usize {
        space_dim(self.j)
    }

    pub fn order(&self) -> u32 {
        ORDER
    }

    pub fn mesh_width(&self) -> f64 {
        1.0 / (1u64 << self.j) as f64
    }
}

fn check_level(j: u32) -> Result<()> {
    if j == 0 || j > 30 {
        return Err(SheqError::InvalidArgument(format!(
            "mesh level {j} outside 1..=30"
        )));
    }
    Ok(())
}

/// Mass matrix `(phi_i, phi_j)` of the unit-height hats.
pub fn gram_matrix(j: u32) -> Result<SymTridiag> {
    check_level(j)?;
    let h = 1.0 / (1u64 << j) as f64;
    Ok(SymTridiag::toeplitz(space_dim(j), 2.0 * h / 3.0, h / 6.0))
}

/// Stiffness matrix `(phi_i', phi_j')`.
pub fn stiffness_matrix(j: u32) -> Result<SymTridiag> {
    check_level(j)?;
    let h = 1.0 / (1u64 << j) as f64;
    Ok(SymTridiag::toeplitz(space_dim(j), 2.0 / h, -1.0 / h))
}

/// `g_k` with `(e_k, phi_i) = sqrt(2) sin(k pi x_i) g_k`.
pub fn hat_sine_factor(k: usize, h: f64) -> f64 {
    let w = k as f64 * PI;
    let s = (0.5 * w * h).sin();
    4.0 * s * s / (w * w * h)
}

/// Closed form of `(e_k, phi_{J,i})`, `i = 1..2^J - 1`.
pub fn mixed_inner_product(k: usize, j: u32, i: usize) -> f64 {
    let n = 1u64 << j;
    let h = 1.0 / n as f64;
    SQRT_2 * (k as f64 * PI * i as f64 * h).sin() * hat_sine_factor(k, h)
}

/// Coupling between the first `K` eigenfunctions and the hats on mesh `2^-J`,
/// applied in `O(K + 2^J log 2^J)` by folding modes modulo `2^(J+1)` and a
/// sine transform.
#[derive(Debug, Clone)]
pub struct ModeCoupling {
    j: u32,
    g: Vec<f64>,
    dst: SineTransform,
}

impl ModeCoupling {
    pub fn new(j: u32, k_modes: usize) -> Result<Self> {
        check_level(j)?;
        if k_modes == 0 {
            return Err(SheqError::InvalidArgument("truncation level must be >= 1".into()));
        }
        let n = 1usize << j;
        let h = 1.0 / n as f64;
        Ok(Self {
            j,
            g: (1..=k_modes).map(|k| hat_sine_factor(k, h)).collect(),
            dst: SineTransform::new(n),
        })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn k_modes(&self) -> usize {
        self.g.len()
    }

    pub fn dim(&self) -> usize {
        space_dim(self.j)
    }

    /// Folded bin (1-based) and sign of mode `k`, or `None` if it vanishes on the nodes.
    #[inline]
    fn fold(&self, k: usize) -> Option<(usize, f64)> {
        let n = 1usize << self.j;
        let m = k % (2 * n);
        if m == 0 || m == n {
            None
        } else if m < n {
            Some((m, 1.0))
        } else {
            Some((2 * n - m, -1.0))
        }
    }

    /// `b_i = (sum_k a_k e_k, phi_i)`.
    pub fn loads(&self, a: &[f64]) -> Vec<f64> {
        let n = 1usize << self.j;
        let mut folded = vec![0.0; n - 1];
        for (k0, (&ak, &gk)) in a.iter().zip(&self.g).enumerate() {
            if let Some((m, sign)) = self.fold(k0 + 1) {
                folded[m - 1] += sign * ak * gk;
            }
        }
        let mut b = self.dst.apply(&folded);
        b.iter_mut().for_each(|x| *x *= SQRT_2);
        b
    }

    /// `t_k = (sum_i c_i phi_i, e_k)` for the nodal vector `c`.
    pub fn transpose(&self, c: &[f64]) -> Vec<f64> {
        let s = self.dst.apply(c);
        (1..=self.g.len())
            .map(|k| match self.fold(k) {
                Some((m, sign)) => SQRT_2 * sign * self.g[k - 1] * s[m - 1],
                None => 0.0,
            })
            .collect()
    }

    /// Spectral field truncated at `K` with coefficients `(v, e_k)` of the
    /// nodal function `v`.
    pub fn to_spectral(&self, c: &[f64]) -> SpectralField {
        SpectralField::new(self.transpose(c)).expect("finite coefficients")
    }
}

fn solve_checked(a: &SymTridiag, b: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(i) = b.iter().position(|x| !x.is_finite()) {
        return Err(SheqError::NonFinite(format!("load vector entry {i}")));
    }
    Ok(a.factorize()?.solve(&b))
}

/// Nodal vector of `P_J field`: solves `M c = b`, `b_i = (field, phi_i)`.
pub fn project_pj(field: &SpectralField, j: u32) -> Result<Vec<f64>> {
    let coupling = ModeCoupling::new(j, field.k_modes())?;
    solve_checked(&gram_matrix(j)?, coupling.loads(field.coeffs()))
}

/// `P_J v` for a callable, with Gauss quadrature on every mesh cell.
pub fn project_pj_fn(v: impl Fn(f64) -> f64, j: u32) -> Result<Vec<f64>> {
    check_level(j)?;
    let n = 1usize << j;
    let h = 1.0 / n as f64;
    let mut b = vec![0.0; n - 1];
    for cell in 0..n {
        let a = cell as f64 * h;
        for (x, w) in gauss_legendre_on(a, h) {
            let fx = v(x) * w;
            let t = (x - a) / h;
            // hats of the left and right cell nodes
            if cell >= 1 {
                b[cell - 1] += fx * (1.0 - t);
            }
            if cell + 1 < n {
                b[cell] += fx * t;
            }
        }
    }
    solve_checked(&gram_matrix(j)?, b)
}

/// Nodal vector of the Ritz projection: solves `S c = b`, `b_i = a(field, phi_i)`.
pub fn ritz_project(field: &SpectralField, j: u32) -> Result<Vec<f64>> {
    let coupling = ModeCoupling::new(j, field.k_modes())?;
    let weighted: Vec<f64> = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * eigenvalue_unchecked(i + 1))
        .collect();
    solve_checked(&stiffness_matrix(j)?, coupling.loads(&weighted))
}

/// Ritz projection of a callable with `v(0) = v(1) = 0`. The load
/// `a(v, phi_i) = (2 v(x_i) - v(x_{i-1}) - v(x_{i+1})) / h` is exact.
pub fn ritz_project_fn(v: impl Fn(f64) -> f64, j: u32) -> Result<Vec<f64>> {
    check_level(j)?;
    let n = 1usize << j;
    let h = 1.0 / n as f64;
    let node = |i: usize| v(i as f64 * h);
    let b: Vec<f64> = (1..n)
        .map(|i| (2.0 * node(i) - node(i - 1) - node(i + 1)) / h)
        .collect();
    solve_checked(&stiffness_matrix(j)?, b)
}

/// `|v_J - v|_{L2}` for a nodal vector and a callable, by Gauss quadrature
/// on `refine` subcells of every mesh cell.
pub fn l2_distance_fn(nodal: &[f64], j: u32, v: impl Fn(f64) -> f64, refine: usize) -> f64 {
    let cells = (1usize << j) * refine.max(1);
    let h = 1.0 / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        for (x, w) in gauss_legendre_on(c as f64 * h, h) {
            let d = eval_nodal(nodal, j, x) - v(x);
            acc += w * d * d;
        }
    }
    acc.sqrt()
}

/// `|v_J - w|_{L2}` for a nodal vector and a spectral field, exactly:
/// `c^T M c - 2 c^T (phi, e) w + |w|^2`.
pub fn l2_distance_spectral(
    nodal: &[f64],
    mass: &SymTridiag,
    coupling: &ModeCoupling,
    field: &SpectralField,
) -> f64 {
    let cross: f64 = coupling
        .loads(field.coeffs())
        .iter()
        .zip(nodal)
        .map(|(b, c)| b * c)
        .sum();
    let w2: f64 = field.coeffs().iter().map(|c| c * c).sum();
    (mass.quad_form(nodal) - 2.0 * cross + w2).max(0.0).sqrt()
}
