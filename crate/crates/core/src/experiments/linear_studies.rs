//! Studies of the linear part: spatial rate, Hoelder regularity, basis checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::StudyConfig;
use super::report::{rms, summarize, Check, RateReport, ReportRow, Series};
use super::{for_each_path, path_seed};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::linear::{mr_error_stream, MrErrorNorm};
use crate::noise::NoisePath;
use crate::spectral::{euler_square_sum, euler_square_sum_limit, exact_convolution_step, SpectralField};
use crate::wavelet::{
    analyze, biorthogonality_defect, l2_distance_fn, ritz_project_fn, stiffness_riesz_constants, synthesize,
    J0,
};

/// Step count of the space study on level `j`: `4^j / coupling`.
pub fn space_steps(cfg: &StudyConfig, j: u32) -> usize {
    (1usize << (2 * j)) / cfg.space_coupling
}

/// `max_n RMS |w_J^n - w^n|` for every `J`, against the spectral solution of
/// the same time-discrete equation. The step shrinks like `4^-J` so that
/// the comparison stays in the parabolic regime; coarser paths are
/// refined into finer ones, which couples all levels.
pub fn space_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let norms = cfg
        .levels
        .iter()
        .map(|&j| MrErrorNorm::new(j, cfg.k_modes))
        .collect::<Result<Vec<_>>>()?;
    let per_path = for_each_path(cfg, |p| {
        let mut steps = space_steps(cfg, cfg.levels[0]);
        let mut path = NoisePath::sample(&spec, &TimeGrid::new(cfg.t_final, steps)?, path_seed(cfg.seed, p));
        let mut out = Vec::with_capacity(cfg.levels.len());
        for (&j, norm) in cfg.levels.iter().zip(&norms) {
            let target = space_steps(cfg, j);
            if target > steps {
                path = path.refine(target / steps)?;
                steps = target;
            }
            out.push(mr_error_stream(path.grid(), &path, norm)?);
        }
        Ok(out)
    })?;
    let mut rows = Vec::new();
    for (i, &j) in cfg.levels.iter().enumerate() {
        let errs: Vec<Vec<f64>> = per_path.iter().map(|p| p[i].clone()).collect();
        rows.push(ReportRow::from_summary(f64::from(j), &summarize(&errs)?));
    }
    let mut report = RateReport::new("space", cfg);
    report
        .series
        .push(Series::new("space", rows).fitted(cfg.slope_target().map(|t| (t, cfg.slope_tol))));
    Ok(report)
}

/// RMS of `|w(t + h) - w(t)|` at `t = T / 2` for lags `h = 2^-l`, sampled
/// with the exact Gaussian transition of the stochastic convolution. The
/// fitted exponent is the mean-square Hoelder exponent.
pub fn hoelder_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let sqrt_q = spec.sqrt_q();
    let t0 = 0.5 * cfg.t_final;
    let per_path = for_each_path(cfg, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(path_seed(cfg.seed, p));
        let (w0, _) = exact_convolution_step(t0, &SpectralField::zeros(cfg.k_modes), &sqrt_q, &mut rng)?;
        cfg.lags
            .iter()
            .map(|&l| {
                let (w1, _) = exact_convolution_step(0.5f64.powi(l as i32), &w0, &sqrt_q, &mut rng)?;
                Ok(w1.sub(&w0).l2_norm())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<ReportRow> = cfg
        .lags
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let col: Vec<f64> = per_path.iter().map(|p| p[i]).collect();
            ReportRow::from_estimate(f64::from(l), rms(&col))
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].error_rms < w[0].error_rms);
    let mut report = RateReport::new("hoelder", cfg);
    report.checks.push(Check::new(
        "increments-vanish-monotonically",
        monotone,
        format!(
            "rms increment {:.3e} at lag 2^-{} down to {:.3e} at 2^-{}",
            rows[0].error_rms,
            cfg.lags[0],
            rows[rows.len() - 1].error_rms,
            cfg.lags[cfg.lags.len() - 1]
        ),
    ));
    report
        .series
        .push(Series::new("hoelder", rows).fitted(cfg.slope_target().map(|t| (t, cfg.slope_tol))));
    Ok(report)
}

/// Tolerances of the basis checks.
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;
pub const ROUND_TRIP_TOL: f64 = 1e-12;
pub const SCALAR_SUM_TOL: f64 = 1e-10;

/// Scalar identity `tau sum (1 + tau lambda)^(-2n) = 1 / (lambda (2 + tau lambda))`
/// with the partial sums bounded by `1 / (2 lambda)`; returns the largest
/// deviation and whether the bound held.
pub fn scalar_sum_check(terms: usize) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut bounded = true;
    for lam in [1.0, 10.0, 100.0] {
        for tau in [0.1, 0.01] {
            let s = euler_square_sum(lam, tau, terms);
            worst = worst.max((s - euler_square_sum_limit(lam, tau)).abs());
            bounded &= s <= 0.5 / lam;
        }
    }
    (worst, bounded)
}

/// Biorthogonality, transform round trips, Ritz approximation order and
/// the scalar resolvent identity.
pub fn basis_check(cfg: &StudyConfig) -> Result<RateReport> {
    let mut report = RateReport::new("basis-check", cfg);
    let defect = biorthogonality_defect(J0 + 5)?;
    report.values.push(("biorthogonality_defect".into(), defect));
    report.checks.push(Check::new(
        "biorthogonality",
        defect <= BIORTHOGONALITY_TOL,
        format!("max |<psi, dual psi> - delta| = {defect:.2e} up to level 5 (tol {BIORTHOGONALITY_TOL:e})"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut round_trip = 0.0f64;
    for &j in &cfg.levels {
        let v: Vec<f64> = (1..1usize << j).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = synthesize(j, &analyze(j, &v)?)?;
        round_trip = round_trip.max(
            v.iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    report.values.push(("round_trip_error".into(), round_trip));
    report.checks.push(Check::new(
        "round-trip",
        round_trip <= ROUND_TRIP_TOL,
        format!("max |T^-1 T v - v| = {round_trip:.2e} (tol {ROUND_TRIP_TOL:e})"),
    ));

    let target = cfg.slope_target().map(|t| (t, cfg.slope_tol));
    type Profile = (&'static str, fn(f64) -> f64);
    let functions: [Profile; 2] = [
        ("ritz-parabola", |x| x * (1.0 - x)),
        ("ritz-sine", |x| (std::f64::consts::PI * x).sin()),
    ];
    for (label, f) in functions {
        let rows = cfg
            .levels
            .iter()
            .map(|&j| {
                let c = ritz_project_fn(f, j)?;
                let e = l2_distance_fn(&c, j, f, 4);
                Ok(ReportRow::from_estimate(
                    f64::from(j),
                    super::report::McEstimate {
                        value: e,
                        stderr: 0.0,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        report.series.push(Series::new(label, rows).fitted(target));
    }

    let (dev, bounded) = scalar_sum_check(100_000);
    report.values.push(("scalar_sum_deviation".into(), dev));
    report.checks.push(Check::new(
        "scalar-resolvent-sums",
        dev <= SCALAR_SUM_TOL && bounded,
        format!("max deviation {dev:.2e} (tol {SCALAR_SUM_TOL:e}), bounded by 1/(2 lambda): {bounded}"),
    ));

    for &j in cfg.levels.iter().filter(|&&j| j <= 8) {
        let (lo, hi) = stiffness_riesz_constants(j)?;
        report.values.push((format!("stiffness_condition_J{j}"), hi / lo));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::StudyKind;

    #[test]
    fn scalar_sums_pass() {
        let (dev, bounded) = scalar_sum_check(100_000);
        assert!(dev < SCALAR_SUM_TOL && bounded);
        // too few terms leave a visible tail
        assert!(scalar_sum_check(10).0 > 1e-3);
    }

    #[test]
    fn small_space_study_is_deterministic() {
        let mut cfg = StudyConfig::defaults(StudyKind::Space);
        cfg.samples = 3;
        cfg.k_modes = 64;
        cfg.levels = vec![3, 4, 5];
        let a = space_study(&cfg).unwrap();
        let b = space_study(&cfg).unwrap();
        assert_eq!(a, b);
        let e = a.series[0].errors();
        assert!(e[2] < e[0]);
    }

    #[test]
    fn hoelder_increments_shrink() {
        let mut cfg = StudyConfig::defaults(StudyKind::Hoelder);
        cfg.samples = 8;
        cfg.k_modes = 128;
        cfg.lags = vec![4, 6, 8];
        let r = hoelder_study(&cfg).unwrap();
        assert!(r.check("increments-vanish-monotonically").unwrap().passed);
    }
}
