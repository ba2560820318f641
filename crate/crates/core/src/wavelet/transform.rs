//! Fast wavelet transforms by lifting.
//!
//! The scaling representation on mesh `2^-J` is the vector of nodal values
//! (coefficients of unit-height hats). One analysis level splits nodal values
//! into details `D_k = u(2k+1) - (u(2k) + u(2k+2)) / 2` at odd nodes and
//! coarse values at even nodes, then updates the coarse values so that every
//! wavelet has two vanishing moments. Wavelets on index level `l` are scaled
//! by `2^((J0 + l) / 2)` and roots by `2^(J0 / 2)`, which makes them roughly
//! L2-normalized.

use super::coeffs::{WaveletCoeffs, DROP_TOL};
use super::filters::{FilterTable, FilterTaps};
use super::index::{space_dim, J0};
use crate::error::{Result, SheqError};

/// Counts floating point operations of the transforms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub ops: u64,
}

impl OpCounter {
    pub fn add(&mut self, n: u64) {
        self.ops += n;
    }
}

fn check_len(j: u32, len: usize) -> Result<usize> {
    if j < J0 {
        return Err(SheqError::InvalidArgument(format!(
            "wavelet transforms need mesh level >= {J0}, got {j}"
        )));
    }
    if j > 30 {
        return Err(SheqError::InvalidArgument(format!("mesh level {j} too large")));
    }
    let dim = space_dim(j);
    if len != dim {
        return Err(SheqError::DimensionMismatch {
            expected: dim,
            got: len,
        });
    }
    Ok(dim)
}

/// Coarse nodes (1-based on the coarse mesh with `n` cells) and weights of
/// the update of wavelet `k`.
#[inline]
fn update_targets(t: &FilterTaps, k: usize, n: usize) -> [(usize, f64); 2] {
    if k == 0 {
        [(1, t.update_left[0]), (2, t.update_left[1])]
    } else if k == n - 1 {
        [(n - 2, t.update_right[0]), (n - 1, t.update_right[1])]
    } else {
        [(k, t.update[0]), (k + 1, t.update[1])]
    }
}

#[inline]
fn detail_scale(j: u32) -> f64 {
    // wavelets refining mesh level j live on mesh level j + 1
    (2f64).powf(0.5 * f64::from(j + 1))
}

#[inline]
fn root_scale() -> f64 {
    (2f64).powf(0.5 * f64::from(J0))
}

/// Nodal values on mesh `2^-j` to flat wavelet coefficients.
pub fn analyze(j: u32, nodal: &[f64]) -> Result<Vec<f64>> {
    analyze_counted(j, nodal, &mut OpCounter::default())
}

pub fn analyze_counted(j: u32, nodal: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
    let dim = check_len(j, nodal.len())?;
    let t = FilterTable::standard().taps();
    let mut out = vec![0.0; dim];
    let mut cur = nodal.to_vec();
    let mut coarse = Vec::with_capacity(dim / 2);
    for lev in (J0..j).rev() {
        let n = 1usize << lev;
        let val = |i: usize| if i == 0 || i == 2 * n { 0.0 } else { cur[i - 1] };
        let offset = n - 1;
        let s = 1.0 / detail_scale(lev);
        coarse.clear();
        coarse.extend((1..n).map(|i| cur[2 * i - 1]));
        for k in 0..n {
            let d = cur[2 * k] - t.predict[0] * val(2 * k) - t.predict[1] * val(2 * k + 2);
            for (node, w) in update_targets(&t, k, n) {
                coarse[node - 1] += w * d;
            }
            out[offset + k] = d * s;
        }
        ops.add(10 * n as u64);
        std::mem::swap(&mut cur, &mut coarse);
        cur.truncate(n - 1);
    }
    let s = 1.0 / root_scale();
    for (o, c) in out.iter_mut().zip(&cur) {
        *o = c * s;
    }
    ops.add(cur.len() as u64);
    Ok(out)
}

/// Flat wavelet coefficients to nodal values on mesh `2^-j`.
pub fn synthesize(j: u32, coeffs: &[f64]) -> Result<Vec<f64>> {
    synthesize_counted(j, coeffs, &mut OpCounter::default())
}

pub fn synthesize_counted(j: u32, coeffs: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
    check_len(j, coeffs.len())?;
    let t = FilterTable::standard().taps();
    let roots = (1usize << J0) - 1;
    let rs = root_scale();
    let mut cur: Vec<f64> = coeffs[..roots].iter().map(|c| c * rs).collect();
    ops.add(roots as u64);
    let mut fine = Vec::with_capacity(coeffs.len());
    for lev in J0..j {
        let n = 1usize << lev;
        let offset = n - 1;
        let s = detail_scale(lev);
        let details = &coeffs[offset..offset + n];
        for (k, d) in details.iter().enumerate() {
            for (node, w) in update_targets(&t, k, n) {
                cur[node - 1] -= w * d * s;
            }
        }
        fine.clear();
        fine.resize(2 * n - 1, 0.0);
        let val = |i: usize| if i == 0 || i == n { 0.0 } else { cur[i - 1] };
        for i in 1..n {
            fine[2 * i - 1] = cur[i - 1];
        }
        for (k, d) in details.iter().enumerate() {
            fine[2 * k] = t.predict[0] * val(k) + t.predict[1] * val(k + 1) + d * s;
        }
        ops.add(11 * n as u64);
        std::mem::swap(&mut cur, &mut fine);
    }
    Ok(cur)
}

/// Transpose of [`synthesize`]: maps nodal-space functionals to wavelet
/// coordinates, `<synthesize(d), g> = <d, synthesize_adjoint(g)>`.
pub fn synthesize_adjoint(j: u32, g: &[f64]) -> Result<Vec<f64>> {
    synthesize_adjoint_counted(j, g, &mut OpCounter::default())
}

pub fn synthesize_adjoint_counted(j: u32, g: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
    let dim = check_len(j, g.len())?;
    let t = FilterTable::standard().taps();
    let mut out = vec![0.0; dim];
    let mut cur = g.to_vec();
    let mut coarse = Vec::with_capacity(dim / 2);
    for lev in (J0..j).rev() {
        let n = 1usize << lev;
        let offset = n - 1;
        let s = detail_scale(lev);
        // even node 2i and its odd neighbours 2i-1 (weight p1) and 2i+1 (weight p0)
        coarse.clear();
        coarse.extend(
            (1..n).map(|i| cur[2 * i - 1] + t.predict[1] * cur[2 * i - 2] + t.predict[0] * cur[2 * i]),
        );
        for k in 0..n {
            let mut gd = cur[2 * k];
            for (node, w) in update_targets(&t, k, n) {
                gd -= w * coarse[node - 1];
            }
            out[offset + k] = gd * s;
        }
        ops.add(10 * n as u64);
        std::mem::swap(&mut cur, &mut coarse);
        cur.truncate(n - 1);
    }
    let rs = root_scale();
    for (o, c) in out.iter_mut().zip(&cur) {
        *o = c * rs;
    }
    ops.add(cur.len() as u64);
    Ok(out)
}

/// Nodal values on mesh `2^-j` to sparse wavelet coefficients.
pub fn fwt(nodal: &[f64], j: u32) -> Result<WaveletCoeffs> {
    Ok(WaveletCoeffs::from_dense(&analyze(j, nodal)?, DROP_TOL))
}

/// Sparse wavelet coefficients to nodal values on mesh `2^-j`.
pub fn ifwt(coeffs: &WaveletCoeffs, j: u32) -> Result<Vec<f64>> {
    synthesize(j, &coeffs.to_dense(space_dim(j))?)
}

/// Dense synthesis matrix (columns are nodal values of the basis functions).
pub fn synthesis_matrix(j: u32) -> Result<nalgebra::DMatrix<f64>> {
    let dim = space_dim(j);
    let mut m = nalgebra::DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for c in 0..dim {
        e[c] = 1.0;
        let col = synthesize(j, &e)?;
        e[c] = 0.0;
        for (r, v) in col.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    Ok(m)
}
