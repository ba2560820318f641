//! Biorthogonal piecewise-linear wavelets on (0, 1) with Dirichlet conditions.
//!
//! Primal functions are hats and lifted hat wavelets with two vanishing
//! moments. Dual functions are never evaluated; dual pairings go through
//! the transforms and the primal Gram system.

mod coarsen;
mod coeffs;
mod eval;
mod filters;
mod galerkin;
mod index;
mod riesz;
mod transform;

pub use coarsen::{anorm_tree_estimate, coarsen, coarsen_dense, greedy_tree_errors};
pub use coeffs::{WaveletCoeffs, DROP_TOL};
pub use eval::{eval_basis, eval_nodal, hat, support};
pub use filters::{FilterTable, FilterTaps, Rational, FILTER_TABLE_VERSION};
pub use galerkin::{
    gram_matrix, hat_sine_factor, l2_distance_fn, l2_distance_spectral, mixed_inner_product, project_pj,
    project_pj_fn, ritz_project, ritz_project_fn, stiffness_matrix, ModeCoupling, MultiresSpace, ORDER,
};
pub use index::{
    children, is_tree, level_count, max_index_level, roots, smallest_tree, space_dim, tree_violation,
    WaveletIndex, J0,
};
pub(crate) use riesz::wavelet_operator;
pub use riesz::{
    dense_wavelet_matrix, lanczos_extremes, riesz_constants, stiffness_riesz_constants, MAX_RIESZ_LEVEL,
};
pub use transform::{
    analyze, analyze_counted, fwt, ifwt, synthesis_matrix, synthesize, synthesize_adjoint,
    synthesize_adjoint_counted, synthesize_counted, OpCounter,
};

use crate::error::Result;
use crate::quadrature::gauss_legendre_on;

/// Largest `|(psi_lambda, psi~_mu) - delta|` over all indices of the space on
/// mesh `2^-j`.
///
/// The dual `psi~_mu` restricted to the space is the Riesz representer of
/// the analysis functional `mu`, with nodal coefficients `M^-1 A^T e_mu`.
/// Primal functions are evaluated pointwise from their definition and the
/// pairing is integrated exactly cell by cell.
pub fn biorthogonality_defect(j: u32) -> Result<f64> {
    let dim = space_dim(j);
    let n = 1usize << j;
    let h = 1.0 / n as f64;
    let mass = gram_matrix(j)?.factorize()?;
    // rows of the analysis matrix = analysis of unit vectors, transposed
    let mut analysis = vec![vec![0.0; dim]; dim];
    let mut e = vec![0.0; dim];
    for col in 0..dim {
        e[col] = 1.0;
        let d = analyze(j, &e)?;
        e[col] = 0.0;
        for (row, v) in d.iter().enumerate() {
            analysis[row][col] = *v;
        }
    }
    let duals: Vec<Vec<f64>> = analysis.iter().map(|row| mass.solve(row)).collect();
    let mut worst: f64 = 0.0;
    for lam in 0..dim {
        let idx = WaveletIndex::from_flat(lam);
        let (lo, hi) = support(idx);
        let first = (lo * n as f64).floor() as usize;
        let last = ((hi * n as f64).ceil() as usize).min(n);
        // primal values at Gauss points of every cell in the support
        let mut samples = Vec::new();
        for cell in first..last {
            for (x, w) in gauss_legendre_on(cell as f64 * h, h) {
                samples.push((x, w, eval_basis(idx, x)));
            }
        }
        for (mu, dual) in duals.iter().enumerate() {
            let pairing: f64 = samples
                .iter()
                .map(|&(x, w, p)| w * p * eval_nodal(dual, j, x))
                .sum();
            let target = if lam == mu { 1.0 } else { 0.0 };
            worst = worst.max((pairing - target).abs());
        }
    }
    Ok(worst)
}
