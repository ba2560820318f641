//! Diagonally preconditioned Galerkin operator of `I + tau A` in wavelet coordinates.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::error::{Result, SheqError};
use crate::tridiag::SymTridiag;
use crate::wavelet::{
    gram_matrix, lanczos_extremes, level_count, max_index_level, riesz_constants, smallest_tree, space_dim,
    stiffness_matrix, support, synthesize, synthesize_adjoint_counted, synthesize_counted, wavelet_operator,
    OpCounter, WaveletCoeffs, WaveletIndex, J0, MAX_RIESZ_LEVEL,
};

/// Mesh level at which the stiffness scaling constant is measured.
pub const CALIBRATION_LEVEL: u32 = 8;

/// Krylov steps used for the extreme eigenvalues of the preconditioned system.
const LANCZOS_STEPS: usize = 160;

/// Median over all wavelets of `a(psi, psi) / 4^(mesh level)` at [`CALIBRATION_LEVEL`].
pub fn stiffness_scaling_constant() -> f64 {
    static C_A: OnceLock<f64> = OnceLock::new();
    *C_A.get_or_init(|| {
        let j = CALIBRATION_LEVEL;
        let dim = space_dim(j);
        let stiff = stiffness_matrix(j).expect("calibration level is valid");
        let mut e = vec![0.0; dim];
        let mut ratios: Vec<f64> = (0..dim)
            .map(|i| {
                e[i] = 1.0;
                let nodal = synthesize(j, &e).expect("calibration level is valid");
                e[i] = 0.0;
                let m = WaveletIndex::from_flat(i).mesh_level();
                stiff.quad_form(&nodal) / 4f64.powi(m as i32)
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        ratios[dim / 2]
    })
}

/// `D^-1 T^T (M + tau S) T D^-1` on mesh level `J` with
/// `d_lambda = (1 + tau 4^|lambda| c_A)^(1/2)`.
#[derive(Debug, Clone)]
pub struct PreconditionedOperator {
    j: u32,
    tau: f64,
    c_a: f64,
    d_inv: Vec<f64>,
    mass: SymTridiag,
    system: SymTridiag,
    b_min: f64,
    b_max: f64,
    riesz_upper: f64,
    omega: f64,
}

impl PreconditionedOperator {
    pub fn new(j: u32, tau: f64) -> Result<Self> {
        if !(J0 + 1..=MAX_RIESZ_LEVEL).contains(&j) {
            return Err(SheqError::InvalidArgument(format!(
                "adaptive solver supports mesh levels {}..={MAX_RIESZ_LEVEL}, got {j}",
                J0 + 1
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SheqError::InvalidArgument(format!(
                "tau = {tau} must be positive"
            )));
        }
        let c_a = stiffness_scaling_constant();
        let dim = space_dim(j);
        let d_inv: Vec<f64> = (0..dim)
            .map(|i| {
                let m = WaveletIndex::from_flat(i).mesh_level() as i32;
                1.0 / (1.0 + tau * 4f64.powi(m) * c_a).sqrt()
            })
            .collect();
        let mass = gram_matrix(j)?;
        let system = mass.add_scaled(tau, &stiffness_matrix(j)?);
        let (b_min, b_max) = lanczos_extremes(dim, LANCZOS_STEPS, |x| {
            wavelet_operator(j, &system, Some(&d_inv), x)
        });
        if !(b_min > 0.0) {
            return Err(SheqError::NotPositiveDefinite { row: 0, pivot: b_min });
        }
        let riesz_upper = riesz_constants(j)?.1;
        Ok(Self {
            j,
            tau,
            c_a,
            d_inv,
            mass,
            system,
            b_min,
            b_max,
            riesz_upper,
            omega: 2.0 / (b_min + b_max),
        })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.d_inv.len()
    }

    pub fn c_a(&self) -> f64 {
        self.c_a
    }

    /// `1 / d_lambda` in flat order.
    pub fn d_inv(&self) -> &[f64] {
        &self.d_inv
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    /// `M + tau S` in the nodal basis.
    pub fn system(&self) -> &SymTridiag {
        &self.system
    }

    /// Extreme eigenvalue estimates of the preconditioned system.
    pub fn spectrum(&self) -> (f64, f64) {
        (self.b_min, self.b_max)
    }

    pub fn condition(&self) -> f64 {
        self.b_max / self.b_min
    }

    /// Upper Riesz constant of the normalized wavelet basis in `L2`.
    pub fn riesz_upper(&self) -> f64 {
        self.riesz_upper
    }

    /// Richardson damping `2 / (b_min + b_max)`.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn check_support(&self, v: &WaveletCoeffs) -> Result<()> {
        let top = max_index_level(self.j)?;
        match v.max_level() {
            Some(l) if l > top => Err(SheqError::InvalidIndex(format!(
                "coefficient on index level {l} beyond the space on mesh level {}",
                self.j
            ))),
            _ => Ok(()),
        }
    }

    /// Nodal values on mesh level `J` of `sum_lambda y_lambda / d_lambda psi_lambda`.
    pub fn to_nodal(&self, y: &WaveletCoeffs) -> Result<Vec<f64>> {
        self.to_nodal_counted(y, &mut OpCounter::default())
    }

    pub(crate) fn to_nodal_counted(&self, y: &WaveletCoeffs, ops: &mut OpCounter) -> Result<Vec<f64>> {
        self.check_support(y)?;
        ops.add(y.len() as u64);
        self.to_nodal_flat(&y.to_dense(self.dim())?, ops)
    }

    /// Nodal values for preconditioned coefficients in flat order.
    pub(crate) fn to_nodal_flat(&self, y: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
        let flat: Vec<f64> = y.iter().zip(&self.d_inv).map(|(v, d)| v * d).collect();
        ops.add(flat.len() as u64);
        synthesize_counted(self.j, &flat, ops)
    }

    /// `D^-1 T^T g` for a nodal functional `g`, in flat order.
    pub(crate) fn functional_to_wavelet(&self, g: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
        let mut out = synthesize_adjoint_counted(self.j, g, ops)?;
        out.iter_mut().zip(&self.d_inv).for_each(|(o, d)| *o *= d);
        ops.add(out.len() as u64);
        Ok(out)
    }

    /// `B y` on every index of the space, in flat order.
    pub(crate) fn apply_full(&self, y: &WaveletCoeffs, ops: &mut OpCounter) -> Result<Vec<f64>> {
        self.check_support(y)?;
        self.apply_flat(&y.to_dense(self.dim())?, ops)
    }

    pub(crate) fn apply_flat(&self, y: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>> {
        let nodal = self.to_nodal_flat(y, ops)?;
        let kn = self.system.matvec(&nodal);
        ops.add(5 * kn.len() as u64);
        self.functional_to_wavelet(&kn, ops)
    }
}

/// Mesh nodes of level `m` in `[lo, hi]`.
fn breakpoints(m: u32, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = 1u64 << m;
    let first = (lo * n as f64).round() as u64;
    let last = (hi * n as f64).round() as u64;
    (first..=last).map(move |i| i as f64 / n as f64)
}

/// Positions on index level `l` whose support meets `(lo, hi)`.
fn overlapping(l: u32, lo: f64, hi: f64) -> impl Iterator<Item = WaveletIndex> {
    let count = level_count(l);
    // supports on level l are at most 3 coarse cells wide
    let cell = if l == 0 {
        1.0 / f64::from(1u32 << J0)
    } else {
        1.0 / (1u64 << (J0 + l - 1)) as f64
    };
    let first = ((lo / cell).floor() as i64 - 3).max(0) as u64;
    let last = ((hi / cell).ceil() as u64 + 3).min(count.saturating_sub(1));
    (first..=last)
        .map(move |pos| WaveletIndex { level: l, pos })
        .filter(move |idx| {
            let (a, b) = support(*idx);
            a.max(lo) < b.min(hi) - 1e-12 * cell
        })
}

/// Indices `mu` of the space on mesh level `j` with a possibly nonzero
/// entry `B_{mu lambda}` for some `lambda` in `support`, closed to a tree.
///
/// On coarser or equal levels these are the overlapping supports. On finer
/// levels `mu` must straddle a breakpoint of `psi_lambda`: elsewhere
/// `psi_lambda` is linear and both the mass and the stiffness pairing vanish
/// by the two vanishing moments.
pub fn expanded_tree(support_set: &BTreeSet<WaveletIndex>, j: u32) -> Result<BTreeSet<WaveletIndex>> {
    let top = max_index_level(j)?;
    let mut out = BTreeSet::new();
    for lam in support_set {
        if lam.level > top {
            return Err(SheqError::InvalidIndex(lam.to_string()));
        }
        let (lo, hi) = support(*lam);
        for l in 0..=lam.level.min(top) {
            out.extend(overlapping(l, lo, hi));
        }
        let kinks: Vec<f64> = breakpoints(lam.mesh_level(), lo, hi).collect();
        for l in lam.level + 1..=top {
            let cell = 1.0 / (1u64 << (J0 + l - 1)) as f64;
            for &x in &kinks {
                out.extend(overlapping(l, x - cell * 1e-9, x + cell * 1e-9).filter(|mu| {
                    let (a, b) = support(*mu);
                    a < x && x < b
                }));
            }
        }
    }
    Ok(smallest_tree(out.iter()))
}

/// `B v` restricted to [`expanded_tree`] of `supp(v)`; exact there and zero
/// elsewhere up to rounding.
pub fn apply_operator(op: &PreconditionedOperator, v: &WaveletCoeffs) -> Result<WaveletCoeffs> {
    apply_operator_counted(op, v, &mut OpCounter::default())
}

pub fn apply_operator_counted(
    op: &PreconditionedOperator,
    v: &WaveletCoeffs,
    ops: &mut OpCounter,
) -> Result<WaveletCoeffs> {
    if !v.is_tree() {
        return Err(SheqError::NotATree("operator input is not tree-flagged".into()));
    }
    v.check_tree()?;
    if v.is_empty() {
        return Ok(WaveletCoeffs::new_tree());
    }
    let full = op.apply_full(v, ops)?;
    let expanded = expanded_tree(&v.support(), op.level())?;
    ops.add(expanded.len() as u64);
    WaveletCoeffs::from_support(&expanded, |idx| full[idx.flat()], true)
}

/// Coefficients of a flat vector on a kept mask; the mask must be a tree.
pub(crate) fn masked_tree(flat: &[f64], keep: &[bool]) -> WaveletCoeffs {
    let mut out = WaveletCoeffs::new_tree();
    for (i, (v, k)) in flat.iter().zip(keep).enumerate() {
        if *k {
            out.insert(WaveletIndex::from_flat(i), *v);
        }
    }
    out
}

/// Nonzeros of a flat vector (above [`DROP_TOL`] relative to its largest
/// entry) closed to a tree.
#[cfg(test)]
pub(crate) fn sparse_tree(flat: &[f64]) -> WaveletCoeffs {
    let scale = flat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    WaveletCoeffs::tree_from_dense(flat, crate::wavelet::DROP_TOL * scale.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::dense_wavelet_matrix;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(seed: u64, j: u32, fill: f64) -> WaveletCoeffs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = space_dim(j);
        let flat: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.random_bool(fill) {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        WaveletCoeffs::tree_from_dense(&flat, 0.0)
    }

    fn dense_b(op: &PreconditionedOperator) -> nalgebra::DMatrix<f64> {
        let g = dense_wavelet_matrix(op.level(), op.system()).unwrap();
        let d = nalgebra::DMatrix::from_diagonal(&DVector::from_vec(op.d_inv().to_vec()));
        &d * g * &d
    }

    #[test]
    fn zero_in_zero_out() {
        let op = PreconditionedOperator::new(6, 0.01).unwrap();
        assert!(apply_operator(&op, &WaveletCoeffs::new_tree())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn matches_dense_product_and_captures_all_nonzeros() {
        for (j, tau, seed) in [(5, 0.1, 1), (7, 0.01, 2), (8, 1e-3, 3)] {
            let op = PreconditionedOperator::new(j, tau).unwrap();
            let b = dense_b(&op);
            for fill in [0.02, 0.1] {
                let v = random_tree(seed, j, fill);
                let out = apply_operator(&op, &v).unwrap();
                out.check_tree().unwrap();
                let want = &b * DVector::from_vec(v.to_dense(op.dim()).unwrap());
                let scale = want.amax();
                for (i, w) in want.iter().enumerate() {
                    let got = out.get(&WaveletIndex::from_flat(i));
                    assert!(
                        (got - w).abs() < 1e-10 * scale.max(1.0),
                        "j={j} i={i}: {got} vs {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn expansion_is_linear_in_support() {
        let j = 10;
        let top = max_index_level(j).unwrap() as usize;
        for seed in 0..5 {
            let v = random_tree(seed, j, 0.01);
            let e = expanded_tree(&v.support(), j).unwrap();
            assert!(v.support().is_subset(&e));
            assert!(e.len() <= 40 * (top + 1) * v.len(), "{} vs {}", e.len(), v.len());
        }
    }

    #[test]
    fn non_tree_rejected() {
        let op = PreconditionedOperator::new(5, 0.01).unwrap();
        let mut v = WaveletCoeffs::new();
        v.insert(WaveletIndex::new(2, 3).unwrap(), 1.0);
        assert!(matches!(apply_operator(&op, &v), Err(SheqError::NotATree(_))));
    }

    #[test]
    fn condition_plateaus_in_level() {
        let tau = 0.01;
        let conds: Vec<f64> = (4..=11)
            .map(|j| PreconditionedOperator::new(j, tau).unwrap().condition())
            .collect();
        let last = *conds.last().unwrap();
        let prev = conds[conds.len() - 2];
        assert!(last < 1.1 * prev, "{conds:?}");
        assert!(conds.iter().all(|c| *c < 60.0), "{conds:?}");
    }

    #[test]
    fn calibration_constant_positive() {
        let c = stiffness_scaling_constant();
        assert!(c > 0.5 && c < 20.0, "{c}");
    }
}
