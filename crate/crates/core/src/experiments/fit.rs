//! Least-squares rate fits on log-scaled errors.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SheqError};

/// Points whose Monte Carlo standard error reaches this fraction of the
/// error are left out of slope fits.
pub const NOISE_FRACTION: f64 = 0.2;

/// Straight-line fit `y = intercept + slope x` with a 95% confidence
/// interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares; needs at least three points with distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(SheqError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(SheqError::InsufficientData(format!(
            "{n} usable points, need at least 3"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SheqError::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = nf - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| SheqError::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Ok(LineFit {
        slope,
        intercept,
        ci_lo: slope - t * se,
        ci_hi: slope + t * se,
        r_squared,
        points: n,
    })
}

/// Convergence rate: the negated slope of `log2(error)` against the
/// refinement index, so that errors halving per level give `1`.
///
/// Non-positive or non-finite errors are unusable.
pub fn fit_rate(errors: &[f64], levels: &[f64]) -> Result<LineFit> {
    fit_rate_filtered(errors, &vec![0.0; errors.len()], levels)
}

/// [`fit_rate`] that also drops points with `stderr >= 0.2 * error`.
pub fn fit_rate_filtered(errors: &[f64], stderrs: &[f64], levels: &[f64]) -> Result<LineFit> {
    if errors.len() != levels.len() || stderrs.len() != levels.len() {
        return Err(SheqError::DimensionMismatch {
            expected: levels.len(),
            got: errors.len().min(stderrs.len()),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = errors
        .iter()
        .zip(stderrs)
        .zip(levels)
        .filter(|((e, s), _)| **e > 0.0 && e.is_finite() && **s < NOISE_FRACTION * **e)
        .map(|((e, _), l)| (*l, e.log2()))
        .unzip();
    let f = fit_line(&x, &y)?;
    Ok(LineFit {
        slope: -f.slope,
        intercept: f.intercept,
        ci_lo: -f.ci_hi,
        ci_hi: -f.ci_lo,
        ..f
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halving_gives_one() {
        let levels: Vec<f64> = (0..6).map(f64::from).collect();
        let errors: Vec<f64> = levels.iter().map(|l| 0.5f64.powf(*l)).collect();
        let f = fit_rate(&errors, &levels).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        assert!((f.ci_hi - f.ci_lo).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_gives_zero() {
        let f = fit_rate(&[0.3; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(f.slope.abs() < 1e-14);
    }

    #[test]
    fn noisy_synthetic_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let levels: Vec<f64> = (3..=10).map(f64::from).collect();
        let errors: Vec<f64> = levels
            .iter()
            .map(|l| 2f64.powf(-1.5 * l) * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))
            .collect();
        let f = fit_rate(&errors, &levels).unwrap();
        assert!((f.slope - 1.5).abs() < 0.1, "{}", f.slope);
        assert!(f.ci_lo <= f.slope && f.slope <= f.ci_hi);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_rate(&[1.0, 0.5], &[0.0, 1.0]),
            Err(SheqError::InsufficientData(_))
        ));
        // noisy points are removed before counting
        let r = fit_rate_filtered(&[1.0, 0.5, 0.25], &[0.0, 0.0, 0.1], &[0.0, 1.0, 2.0]);
        assert!(matches!(r, Err(SheqError::InsufficientData(_))));
    }
}
