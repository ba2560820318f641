//! Q-Wiener noise diagonal in the Laplacian eigenbasis.
//!
//! The covariance has eigenvalues `q_k = a * k^(-rho)` on `e_k`. A path stores
//! the standard normal draws `xi[n][k]`; the increment over step `n` in mode
//! `k` is `sqrt(q_k tau) xi[n][k]`. Draws are keyed by `(seed, mode, level)`
//! through independent ChaCha streams, so sampling and refinement are
//! reproducible and can be done mode by mode in any order.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SheqError};
use crate::grid::TimeGrid;
use crate::wavelet::ModeCoupling;

/// Magic header of the binary path dump.
pub const DUMP_MAGIC: &[u8; 16] = b"SHEQ-NOISEPATH01";

/// Share of the head sum the tail bound may reach in [`hs_weighted_norm`].
pub const HS_TAIL_FRACTION: f64 = 0.01;

/// Power-law covariance `q_k = amplitude * k^(-rho)`, truncated at `K` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    rho: f64,
    amplitude: f64,
    k_modes: usize,
    beta_target: f64,
}

impl CovarianceSpec {
    pub fn new(rho: f64, k_modes: usize, beta_target: f64) -> Result<Self> {
        Self::with_amplitude(rho, 1.0, k_modes, beta_target)
    }

    pub fn with_amplitude(rho: f64, amplitude: f64, k_modes: usize, beta_target: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(SheqError::InvalidArgument(format!("rho = {rho} must be >= 0")));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(SheqError::InvalidArgument(format!(
                "amplitude = {amplitude} must be >= 0"
            )));
        }
        if k_modes == 0 {
            return Err(SheqError::InvalidArgument("truncation level must be >= 1".into()));
        }
        if !(beta_target >= 0.0) {
            return Err(SheqError::InvalidArgument(format!(
                "beta = {beta_target} must be >= 0"
            )));
        }
        if amplitude > 0.0 && rho <= 2.0 * beta_target - 1.0 {
            return Err(SheqError::AssumptionViolation(format!(
                "rho = {rho} must exceed 2 beta - 1 = {} for beta = {beta_target}",
                2.0 * beta_target - 1.0
            )));
        }
        Ok(Self {
            rho,
            amplitude,
            k_modes,
            beta_target,
        })
    }

    /// `Q = 0`.
    pub fn zero(k_modes: usize) -> Self {
        Self {
            rho: 0.0,
            amplitude: 0.0,
            k_modes: k_modes.max(1),
            beta_target: 0.0,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn k_modes(&self) -> usize {
        self.k_modes
    }

    pub fn beta_target(&self) -> f64 {
        self.beta_target
    }

    /// Same covariance with a different truncation level.
    pub fn with_k_modes(&self, k_modes: usize) -> Self {
        Self {
            k_modes: k_modes.max(1),
            ..self.clone()
        }
    }

    /// `q_k`, `k >= 1`.
    pub fn q(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        self.amplitude * (k as f64).powf(-self.rho)
    }

    /// `sqrt(q_k)` for `k = 1..=K`.
    pub fn sqrt_q(&self) -> Vec<f64> {
        (1..=self.k_modes).map(|k| self.q(k).sqrt()).collect()
    }
}

/// Head sum and integral-test tail bound of `sum_k lambda_k^(beta-1) q_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParts {
    /// Partial sum over the retained modes.
    pub head: f64,
    /// Upper bound for the omitted modes `k > K`.
    pub tail_bound: f64,
}

impl HsParts {
    /// Upper bound for the full Hilbert-Schmidt norm.
    pub fn norm_bound(&self) -> f64 {
        (self.head + self.tail_bound).sqrt()
    }
}

/// Squared-norm parts of `A^((beta-1)/2) Q^(1/2)`; only divergence is an error.
pub fn hs_weighted_parts(spec: &CovarianceSpec, beta: f64) -> Result<HsParts> {
    if spec.amplitude == 0.0 {
        return Ok(HsParts {
            head: 0.0,
            tail_bound: 0.0,
        });
    }
    // lambda_k^(beta-1) q_k = a pi^(2beta-2) k^(-p)
    let p = spec.rho + 2.0 - 2.0 * beta;
    if p <= 1.0 {
        return Err(SheqError::AssumptionViolation(format!(
            "sum of lambda_k^(beta-1) q_k diverges for rho = {} and beta = {beta}",
            spec.rho
        )));
    }
    let c = spec.amplitude * PI.powf(2.0 * beta - 2.0);
    let head = (1..=spec.k_modes).rev().map(|k| (k as f64).powf(-p)).sum::<f64>() * c;
    let tail_bound = c * (spec.k_modes as f64).powf(1.0 - p) / (p - 1.0);
    Ok(HsParts { head, tail_bound })
}

/// `|A^((beta-1)/2) Q^(1/2)|_HS`, head plus tail bound.
///
/// Errors when the series diverges, or when the truncation does not resolve
/// it (tail bound above 1% of the head).
pub fn hs_weighted_norm(spec: &CovarianceSpec, beta: f64) -> Result<f64> {
    let parts = hs_weighted_parts(spec, beta)?;
    if parts.tail_bound > HS_TAIL_FRACTION * parts.head {
        return Err(SheqError::AssumptionViolation(format!(
            "tail bound {:.3e} exceeds {}% of the head sum {:.3e} at K = {}",
            parts.tail_bound,
            HS_TAIL_FRACTION * 100.0,
            parts.head,
            spec.k_modes
        )));
    }
    Ok(parts.norm_bound())
}

/// One realization of the Q-Wiener increments on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    grid: TimeGrid,
    level: u32,
    sqrt_q: Vec<f64>,
    /// Standard normals, step-major: `xi[(n - 1) * K + (k - 1)]`.
    xi: Vec<f64>,
}

fn stream_key(mode: usize, level: u32) -> u64 {
    mode as u64 | (u64::from(level) << 40)
}

fn mode_rng(seed: u64, mode: usize, level: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(mode, level));
    rng
}

impl NoisePath {
    /// Draws a path; see [`sample_path`].
    pub fn sample(spec: &CovarianceSpec, grid: &TimeGrid, seed: u64) -> Self {
        let k = spec.k_modes();
        let steps = grid.steps();
        let mut xi = vec![0.0; steps * k];
        for mode in 1..=k {
            let mut rng = mode_rng(seed, mode, 0);
            for n in 0..steps {
                xi[n * k + mode - 1] = rng.sample(StandardNormal);
            }
        }
        Self {
            seed,
            grid: *grid,
            level: 0,
            sqrt_q: spec.sqrt_q(),
            xi,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Number of dyadic refinements applied since sampling.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn k_modes(&self) -> usize {
        self.sqrt_q.len()
    }

    pub fn sqrt_q(&self) -> &[f64] {
        &self.sqrt_q
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Standard normals of step `n` (`1..=N`).
    pub fn xi_step(&self, n: usize) -> &[f64] {
        let k = self.k_modes();
        assert!(n >= 1 && n <= self.grid.steps(), "step {n} out of range");
        &self.xi[(n - 1) * k..n * k]
    }

    /// Per-mode coefficients of `Delta W^n`, `n = 1..=N`.
    pub fn increments(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k_modes()];
        self.increments_into(n, &mut out);
        out
    }

    pub fn increments_into(&self, n: usize, out: &mut [f64]) {
        let st = self.grid.tau().sqrt();
        for ((o, x), s) in out.iter_mut().zip(self.xi_step(n)).zip(&self.sqrt_q) {
            *o = s * st * x;
        }
    }

    /// Same path with every increment multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            xi: self.xi.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// Brownian-bridge refinement; see [`refine_path`].
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor < 2 || !factor.is_power_of_two() {
            return Err(SheqError::InvalidArgument(format!(
                "refinement factor {factor} must be a power of 2 and >= 2"
            )));
        }
        let mut path = self.refine_once()?;
        for _ in 1..factor.trailing_zeros() {
            path = path.refine_once()?;
        }
        Ok(path)
    }

    fn refine_once(&self) -> Result<Self> {
        let k = self.k_modes();
        let steps = self.grid.steps();
        let level = self.level + 1;
        let mut xi = vec![0.0; 2 * steps * k];
        for mode in 1..=k {
            let mut rng = mode_rng(self.seed, mode, level);
            for n in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                let x = self.xi[n * k + mode - 1];
                // both halves carry variance tau/2 and sum to the coarse increment
                xi[2 * n * k + mode - 1] = (x + z) * FRAC_1_SQRT_2;
                xi[(2 * n + 1) * k + mode - 1] = (x - z) * FRAC_1_SQRT_2;
            }
        }
        Ok(Self {
            seed: self.seed,
            grid: self.grid.refined(2)?,
            level,
            sqrt_q: self.sqrt_q.clone(),
            xi,
        })
    }

    /// Verifies that `fine` was obtained from `self` by refinement and returns
    /// the factor. Fine increments must sum to the coarse ones.
    pub fn check_refines_to(&self, fine: &NoisePath) -> Result<usize> {
        let factor = self.grid.refinement_factor(&fine.grid).ok_or_else(|| {
            SheqError::InconsistentRefinement(format!(
                "grid with {} steps is not a refinement of one with {} steps",
                fine.grid.steps(),
                self.grid.steps()
            ))
        })?;
        if fine.seed != self.seed || fine.sqrt_q != self.sqrt_q {
            return Err(SheqError::InconsistentRefinement(
                "paths differ in seed or covariance".into(),
            ));
        }
        let k = self.k_modes();
        let mut acc = vec![0.0; k];
        let mut buf = vec![0.0; k];
        for n in 1..=self.grid.steps() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for m in (n - 1) * factor + 1..=n * factor {
                fine.increments_into(m, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
            }
            let coarse = self.increments(n);
            for (mode, (a, c)) in acc.iter().zip(&coarse).enumerate() {
                let scale = self.sqrt_q[mode] * self.grid.tau().sqrt();
                if (a - c).abs() > 1e-10 * scale.max(1e-300) * (1.0 + c.abs() / scale.max(1e-300)) {
                    return Err(SheqError::InconsistentRefinement(format!(
                        "fine increments of step {n}, mode {} sum to {a}, coarse is {c}",
                        mode + 1
                    )));
                }
            }
        }
        Ok(factor)
    }

    /// Binary dump: magic, `K`, `N`, seed as little-endian `u64`, then the
    /// step-major normals as little-endian `f64`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(self.k_modes() as u64).to_le_bytes())?;
        out.write_all(&(self.grid.steps() as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        for x in &self.xi {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Rebuilds a path from a dump, the covariance and the final time.
    /// The refinement level is not part of the dump and is reset to 0.
    pub fn from_dump(dump: PathDump, spec: &CovarianceSpec, t_final: f64) -> Result<Self> {
        if dump.k_modes != spec.k_modes() {
            return Err(SheqError::DimensionMismatch {
                expected: spec.k_modes(),
                got: dump.k_modes,
            });
        }
        Ok(Self {
            seed: dump.seed,
            grid: TimeGrid::new(t_final, dump.steps)?,
            level: 0,
            sqrt_q: spec.sqrt_q(),
            xi: dump.xi,
        })
    }
}

/// Raw content of a path dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub k_modes: usize,
    pub steps: usize,
    pub seed: u64,
    pub xi: Vec<f64>,
}

pub fn read_dump<R: Read>(mut input: R) -> Result<PathDump> {
    let mut magic = [0u8; 16];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(SheqError::Format("not a noise path dump (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let k_modes = next_u64(&mut input)? as usize;
    let steps = next_u64(&mut input)? as usize;
    let seed = next_u64(&mut input)?;
    let len = k_modes
        .checked_mul(steps)
        .ok_or_else(|| SheqError::Format("dump dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(SheqError::Format(format!(
            "expected {} bytes of samples, found {}",
            8 * len,
            bytes.len()
        )));
    }
    let xi = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(PathDump {
        k_modes,
        steps,
        seed,
        xi,
    })
}

/// Samples a path keyed by `(seed, mode, level)`; bit-exact for equal inputs.
pub fn sample_path(spec: &CovarianceSpec, grid: &TimeGrid, seed: u64) -> NoisePath {
    NoisePath::sample(spec, grid, seed)
}

/// Splits every step into `factor` substeps by conditional Brownian-bridge
/// sampling. Refining by 4 equals refining twice by 2 bit for bit.
pub fn refine_path(path: &NoisePath, factor: usize) -> Result<NoisePath> {
    path.refine(factor)
}

/// Galerkin load `b_i = (Delta W^n, phi_{J,i})` for step `n = 1..=N`.
pub fn increment_in_sj(path: &NoisePath, n: usize, j: u32) -> Result<Vec<f64>> {
    if n == 0 || n > path.grid().steps() {
        return Err(SheqError::InvalidArgument(format!(
            "step {n} outside 1..={}",
            path.grid().steps()
        )));
    }
    let coupling = ModeCoupling::new(j, path.k_modes())?;
    Ok(coupling.loads(&path.increments(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hs_norm_trace_class_example() {
        let spec = CovarianceSpec::new(2.0, 512, 1.0).unwrap();
        let v = hs_weighted_norm(&spec, 1.0).unwrap();
        let exact = (PI * PI / 6.0).sqrt();
        assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
        assert!(v >= exact - 1e-12);
    }

    #[test]
    fn hs_norm_divergence_rejected() {
        let spec = CovarianceSpec::new(1.0, 512, 0.5).unwrap();
        let err = hs_weighted_norm(&spec, 1.0).unwrap_err();
        assert!(matches!(err, SheqError::AssumptionViolation(_)));
        assert!(CovarianceSpec::new(1.0, 512, 1.0).is_err());
    }

    #[test]
    fn hs_norm_unresolved_tail_rejected() {
        let spec = CovarianceSpec::new(0.1, 512, 0.5).unwrap();
        assert!(hs_weighted_norm(&spec, 0.5).is_err());
        let parts = hs_weighted_parts(&spec, 0.5).unwrap();
        assert!(parts.tail_bound > parts.head * HS_TAIL_FRACTION);
    }

    #[test]
    fn hs_norm_increases_with_beta() {
        let spec = CovarianceSpec::new(4.0, 512, 0.0).unwrap();
        let mut last = 0.0;
        for beta in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let v = hs_weighted_norm(&spec, beta).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = CovarianceSpec::new(2.0, 16, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let a = sample_path(&spec, &grid, 42);
        let b = sample_path(&spec, &grid, 42);
        let c = sample_path(&spec, &grid, 43);
        assert_eq!(a, b);
        assert_ne!(a.xi(), c.xi());
    }

    #[test]
    fn refinement_sums_and_bit_exactness() {
        let spec = CovarianceSpec::new(1.2, 32, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let p = sample_path(&spec, &grid, 7);
        let r4 = refine_path(&p, 4).unwrap();
        let r22 = refine_path(&refine_path(&p, 2).unwrap(), 2).unwrap();
        assert_eq!(r4, r22);
        assert_eq!(p.check_refines_to(&r4).unwrap(), 4);
        for n in 1..=8 {
            let coarse = p.increments(n);
            let mut acc = vec![0.0; 32];
            for m in 4 * (n - 1) + 1..=4 * n {
                for (a, b) in acc.iter_mut().zip(r4.increments(m)) {
                    *a += b;
                }
            }
            for (a, c) in acc.iter().zip(&coarse) {
                assert!((a - c).abs() < 1e-14);
            }
        }
        assert!(refine_path(&p, 3).is_err());
        assert!(refine_path(&p, 1).is_err());
    }

    #[test]
    fn unrelated_path_rejected_as_refinement() {
        let spec = CovarianceSpec::new(1.2, 8, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = sample_path(&spec, &grid, 1);
        let other = sample_path(&spec, &grid.refined(4).unwrap(), 1);
        assert!(p.check_refines_to(&other).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let spec = CovarianceSpec::new(2.0, 5, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let p = sample_path(&spec, &grid, 9);
        let mut buf = Vec::new();
        p.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 24 + 8 * 15);
        let dump = read_dump(buf.as_slice()).unwrap();
        assert_eq!(dump.seed, 9);
        let back = NoisePath::from_dump(dump, &spec, 1.0).unwrap();
        assert_eq!(back, p);
        buf[0] = b'X';
        assert!(matches!(read_dump(buf.as_slice()), Err(SheqError::Format(_))));
    }
}
