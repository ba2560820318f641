//! Extreme eigenvalues of wavelet Gram matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::galerkin::{gram_matrix, stiffness_matrix};
use super::index::space_dim;
use super::transform::{synthesize, synthesize_adjoint};
use crate::error::{Result, SheqError};

/// Largest mesh level accepted by [`riesz_constants`].
pub const MAX_RIESZ_LEVEL: u32 = 12;

/// Extreme eigenvalues of a symmetric operator by Lanczos with full
/// reorthogonalization, using at most `steps` Krylov vectors.
pub fn lanczos_extremes(dim: usize, steps: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> (f64, f64) {
    let m = steps.min(dim).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= norm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        let mut w = apply(&basis[i]);
        let a: f64 = w.iter().zip(&basis[i]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        // two passes of Gram-Schmidt against every previous vector
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nb = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if i + 1 == m || nb < 1e-12 * a.abs().max(1e-300) {
            break;
        }
        beta.push(nb);
        w.iter_mut().for_each(|x| *x /= nb);
        basis.push(w);
    }
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn check_riesz_level(j: u32) -> Result<usize> {
    if !(super::index::J0..=MAX_RIESZ_LEVEL).contains(&j) {
        return Err(SheqError::InvalidArgument(format!(
            "Riesz constants available for mesh levels {}..={MAX_RIESZ_LEVEL}, got {j}",
            super::index::J0
        )));
    }
    Ok(space_dim(j))
}

/// Applies `D^-1 T^T K T D^-1` for a tridiagonal `K` in nodal coordinates.
pub(crate) fn wavelet_operator(
    j: u32,
    k: &crate::tridiag::SymTridiag,
    d_inv: Option<&[f64]>,
    x: &[f64],
) -> Vec<f64> {
    let scaled: Vec<f64> = match d_inv {
        Some(d) => x.iter().zip(d).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    };
    let nodal = synthesize(j, &scaled).expect("dimension checked by caller");
    let kn = k.matvec(&nodal);
    let mut out = synthesize_adjoint(j, &kn).expect("dimension checked by caller");
    if let Some(d) = d_inv {
        out.iter_mut().zip(d).for_each(|(a, b)| *a *= b);
    }
    out
}

/// Lower and upper Riesz constants `(lambda_min, lambda_max)` of the L2
/// Gram matrix of the normalized wavelet basis on mesh `2^-j`.
pub fn riesz_constants(j: u32) -> Result<(f64, f64)> {
    let dim = check_riesz_level(j)?;
    let mass = gram_matrix(j)?;
    Ok(lanczos_extremes(dim, 160, |x| {
        wavelet_operator(j, &mass, None, x)
    }))
}

/// Extreme eigenvalues of the stiffness matrix in wavelet coordinates
/// scaled by `2^-(mesh level)` per basis function.
pub fn stiffness_riesz_constants(j: u32) -> Result<(f64, f64)> {
    let dim = check_riesz_level(j)?;
    let stiff = stiffness_matrix(j)?;
    let d_inv: Vec<f64> = (0..dim)
        .map(|i| 2f64.powi(-(super::index::WaveletIndex::from_flat(i).mesh_level() as i32)))
        .collect();
    Ok(lanczos_extremes(dim, 160, |x| {
        wavelet_operator(j, &stiff, Some(&d_inv), x)
    }))
}

/// Dense wavelet matrix `T^T K T` (for oracles at small levels).
pub fn dense_wavelet_matrix(j: u32, k: &crate::tridiag::SymTridiag) -> Result<DMatrix<f64>> {
    let t = super::transform::synthesis_matrix(j)?;
    Ok(t.transpose() * k.to_dense() * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_matches_dense_eigenvalues() {
        for j in 3..=7 {
            let g = dense_wavelet_matrix(j, &gram_matrix(j).unwrap()).unwrap();
            let eig = SymmetricEigen::new(g).eigenvalues;
            let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (l, h) = riesz_constants(j).unwrap();
            assert!((l - lo).abs() < 1e-8 * hi, "j={j}: {l} vs {lo}");
            assert!((h - hi).abs() < 1e-8 * hi, "j={j}: {h} vs {hi}");
        }
    }

    #[test]
    fn constants_positive_and_stabilizing() {
        let consts: Vec<(f64, f64)> = (4..=12).map(|j| riesz_constants(j).unwrap()).collect();
        // the lower constant decays with a ratio that tends to one
        let ratios: Vec<f64> = consts.windows(2).map(|w| w[1].0 / w[0].0).collect();
        for w in ratios.windows(2) {
            assert!(w[1] >= w[0] && w[1] < 1.0, "{ratios:?}");
        }
        assert!(ratios.last().unwrap() > &0.95);
        for w in consts.windows(2) {
            assert!(w[1].0 > 0.0);
            assert!((w[1].1 / w[0].1 - 1.0).abs() < 0.1);
        }
        assert!(riesz_constants(13).is_err());
    }

    #[test]
    fn stiffness_condition_bounded() {
        let mut conds = Vec::new();
        for j in 4..=10 {
            let (l, h) = stiffness_riesz_constants(j).unwrap();
            conds.push(h / l);
        }
        let first = conds[0];
        for c in &conds {
            assert!(*c < 4.0 * first, "{conds:?}");
        }
    }
}
