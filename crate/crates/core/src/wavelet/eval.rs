//! Pointwise evaluation of the primal basis functions.
//!
//! Built directly from the filter definitions, independently of the
//! transforms, so it can serve as a cross-check for them.

use super::filters::FilterTable;
use super::index::{WaveletIndex, J0};

/// Unit-height hat centred at `c` with half-width `h`.
#[inline]
pub fn hat(x: f64, c: f64, h: f64) -> f64 {
    (1.0 - (x - c).abs() / h).max(0.0)
}

/// Value of the normalized basis function `psi_lambda` at `x`.
pub fn eval_basis(idx: WaveletIndex, x: f64) -> f64 {
    if idx.level == 0 {
        let h = 1.0 / f64::from(1u32 << J0);
        return (2f64).powf(0.5 * f64::from(J0)) * hat(x, (idx.pos + 1) as f64 * h, h);
    }
    let j = J0 + idx.level - 1;
    let n = 1u64 << j;
    let coarse_h = 1.0 / n as f64;
    let fine_h = 0.5 * coarse_h;
    let k = idx.pos;
    let t = FilterTable::standard().taps();
    let targets = if k == 0 {
        [(1, t.update_left[0]), (2, t.update_left[1])]
    } else if k == n - 1 {
        [(n - 2, t.update_right[0]), (n - 1, t.update_right[1])]
    } else {
        [(k, t.update[0]), (k + 1, t.update[1])]
    };
    let mut v = hat(x, (2 * k + 1) as f64 * fine_h, fine_h);
    for (node, w) in targets {
        v -= w * hat(x, node as f64 * coarse_h, coarse_h);
    }
    (2f64).powf(0.5 * f64::from(j + 1)) * v
}

/// Closed support interval of `psi_lambda`.
pub fn support(idx: WaveletIndex) -> (f64, f64) {
    if idx.level == 0 {
        let h = 1.0 / f64::from(1u32 << J0);
        let c = (idx.pos + 1) as f64 * h;
        return (c - h, c + h);
    }
    let j = J0 + idx.level - 1;
    let n = 1u64 << j;
    let h = 1.0 / n as f64;
    let k = idx.pos;
    let (lo, hi) = if k == 0 {
        (0, 3)
    } else if k == n - 1 {
        (n - 3, n)
    } else {
        (k - 1, k + 2)
    };
    (lo as f64 * h, hi as f64 * h)
}

/// Value at `x` of the piecewise-linear function with the given nodal values
/// on mesh `2^-j`.
pub fn eval_nodal(nodal: &[f64], j: u32, x: f64) -> f64 {
    let n = 1usize << j;
    debug_assert_eq!(nodal.len(), n - 1);
    let s = (x.clamp(0.0, 1.0)) * n as f64;
    let cell = (s.floor() as usize).min(n - 1);
    let t = s - cell as f64;
    let val = |i: usize| if i == 0 || i == n { 0.0 } else { nodal[i - 1] };
    (1.0 - t) * val(cell) + t * val(cell + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_unit;
    use crate::wavelet::index::{level_count, space_dim};
    use crate::wavelet::transform::synthesize;

    #[test]
    fn pointwise_matches_synthesis() {
        let j = 7;
        let dim = space_dim(j);
        let n = 1 << j;
        let mut e = vec![0.0; dim];
        for flat in 0..dim {
            e[flat] = 1.0;
            let nodal = synthesize(j, &e).unwrap();
            e[flat] = 0.0;
            let idx = WaveletIndex::from_flat(flat);
            for i in 1..n {
                let x = i as f64 / n as f64;
                assert!((eval_basis(idx, x) - nodal[i - 1]).abs() < 1e-12, "{idx} at {x}");
            }
        }
    }

    #[test]
    fn two_vanishing_moments() {
        for level in 1..=6 {
            for pos in 0..level_count(level) {
                let idx = WaveletIndex::new(level, pos).unwrap();
                let cells = 1 << (J0 + level + 1);
                let m0 = integrate_unit(cells, |x| eval_basis(idx, x));
                let m1 = integrate_unit(cells, |x| x * eval_basis(idx, x));
                assert!(m0.abs() < 1e-13, "{idx}: {m0}");
                assert!(m1.abs() < 1e-13, "{idx}: {m1}");
            }
        }
    }

    #[test]
    fn locality() {
        for level in 0..=6 {
            for pos in 0..level_count(level) {
                let idx = WaveletIndex::new(level, pos).unwrap();
                let (lo, hi) = support(idx);
                assert!(hi - lo <= 3.0 * 2f64.powi(-((J0 + level) as i32) + 1) + 1e-15);
                let cells = 1 << (J0 + level + 2);
                for c in 0..=cells {
                    let x = c as f64 / cells as f64;
                    if x < lo - 1e-15 || x > hi + 1e-15 {
                        assert_eq!(eval_basis(idx, x), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn nodal_interpolation() {
        let nodal = [1.0, 2.0, 3.0];
        assert_eq!(eval_nodal(&nodal, 2, 0.25), 1.0);
        assert_eq!(eval_nodal(&nodal, 2, 0.375), 1.5);
        assert_eq!(eval_nodal(&nodal, 2, 1.0), 0.0);
        assert_eq!(eval_nodal(&nodal, 2, 0.0), 0.0);
    }
}
