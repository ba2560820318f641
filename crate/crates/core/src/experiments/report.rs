//! Monte Carlo summaries, study reports and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::StudyConfig;
use super::fit::{fit_rate_filtered, LineFit};
use crate::adaptive::{write_stats_csv, StepStats};
use crate::error::{Result, SheqError};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `sqrt(mean(x^2))` with the delta-method standard error
/// `sd(x^2) / (2 sqrt(M) rms)`.
pub fn rms(samples: &[f64]) -> McEstimate {
    let m = samples.len() as f64;
    if samples.is_empty() {
        return McEstimate::default();
    }
    let mean_sq = samples.iter().map(|x| x * x).sum::<f64>() / m;
    let value = mean_sq.sqrt();
    if samples.len() < 2 || value == 0.0 {
        return McEstimate { value, stderr: 0.0 };
    }
    let var = samples.iter().map(|x| (x * x - mean_sq).powi(2)).sum::<f64>() / (m - 1.0);
    McEstimate {
        value,
        stderr: (var / m).sqrt() / (2.0 * value),
    }
}

/// Error functionals over time nodes for a set of paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    /// `max_n (E |e^n|^2)^(1/2)`, the quantity the targets refer to.
    pub max_of_rms: McEstimate,
    /// Node attaining `max_of_rms`.
    pub argmax: usize,
    /// `(E max_n |e^n|^2)^(1/2)`.
    pub rms_of_max: McEstimate,
}

/// `per_path[p][n]` is the error of path `p` at node `n`; all paths need
/// the same number of nodes.
pub fn summarize(per_path: &[Vec<f64>]) -> Result<ErrorSummary> {
    let nodes = per_path
        .first()
        .map(Vec::len)
        .ok_or_else(|| SheqError::InsufficientData("no paths".into()))?;
    if let Some(p) = per_path.iter().find(|p| p.len() != nodes) {
        return Err(SheqError::DimensionMismatch {
            expected: nodes,
            got: p.len(),
        });
    }
    let mut best = (McEstimate::default(), 0);
    let mut column = vec![0.0; per_path.len()];
    for n in 0..nodes {
        column.iter_mut().zip(per_path).for_each(|(c, p)| *c = p[n]);
        let est = rms(&column);
        if est.value > best.0.value || n == 0 {
            best = (est, n);
        }
    }
    let maxima: Vec<f64> = per_path
        .iter()
        .map(|p| p.iter().fold(0.0f64, |m, v| m.max(*v)))
        .collect();
    Ok(ErrorSummary {
        max_of_rms: best.0,
        argmax: best.1,
        rms_of_max: rms(&maxima),
    })
}

/// One resolution of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    /// Refinement index (`J`, `log2 N`, `-log2 lag`, ...).
    pub level: f64,
    pub error_rms: f64,
    pub stderr: f64,
    /// Surrogate functional `(E max_n |e^n|^2)^(1/2)`; NaN where meaningless.
    pub rms_of_max: f64,
}

impl ReportRow {
    pub fn from_summary(level: f64, s: &ErrorSummary) -> Self {
        Self {
            level,
            error_rms: s.max_of_rms.value,
            stderr: s.max_of_rms.stderr,
            rms_of_max: s.rms_of_max.value,
        }
    }

    pub fn from_estimate(level: f64, e: McEstimate) -> Self {
        Self {
            level,
            error_rms: e.value,
            stderr: e.stderr,
            rms_of_max: f64::NAN,
        }
    }
}

/// A sequence of rows with an optional rate fit and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub rows: Vec<ReportRow>,
    pub fit: Option<LineFit>,
    /// `(target slope, tolerance)`.
    pub target: Option<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, rows: Vec<ReportRow>) -> Self {
        Self {
            label: label.into(),
            rows,
            fit: None,
            target: None,
        }
    }

    /// Fits the rate with the noise filter; a failed fit is recorded as `None`.
    pub fn fitted(mut self, target: Option<(f64, f64)>) -> Self {
        let e: Vec<f64> = self.rows.iter().map(|r| r.error_rms).collect();
        let s: Vec<f64> = self.rows.iter().map(|r| r.stderr).collect();
        let l: Vec<f64> = self.rows.iter().map(|r| r.level).collect();
        self.fit = fit_rate_filtered(&e, &s, &l).ok();
        self.target = target;
        self
    }

    /// Whether the fitted slope lies within the tolerance of the target.
    pub fn slope_ok(&self) -> Option<bool> {
        let (t, tol) = self.target?;
        Some(self.fit.is_some_and(|f| (f.slope - t).abs() <= tol))
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_rms).collect()
    }
}

/// A named pass/fail statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Outcome of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub study: String,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    /// Named scalar results.
    pub values: Vec<(String, f64)>,
    /// Adaptive solver statistics per path id.
    pub stats: Vec<(u64, Vec<StepStats>)>,
    pub config_hash: String,
    pub version: String,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    study: &'a str,
    level: f64,
    error_rms: f64,
    stderr: f64,
    slope: Option<f64>,
    slope_ci_lo: Option<f64>,
    slope_ci_hi: Option<f64>,
}

impl RateReport {
    pub fn new(study: &str, config: &StudyConfig) -> Self {
        Self {
            study: study.to_string(),
            series: Vec::new(),
            checks: Vec::new(),
            values: Vec::new(),
            stats: Vec::new(),
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// All checks pass and every targeted slope is within tolerance.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.series.iter().all(|s| s.slope_ok() != Some(false))
    }

    /// `study, level, error_rms, stderr, slope, slope_ci_lo, slope_ci_hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.series {
            for r in &s.rows {
                w.serialize(CsvRow {
                    study: &s.label,
                    level: r.level,
                    error_rms: r.error_rms,
                    stderr: r.stderr,
                    slope: s.fit.map(|f| f.slope),
                    slope_ci_lo: s.fit.map(|f| f.ci_lo),
                    slope_ci_hi: s.fit.map(|f| f.ci_hi),
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable summary of series, values and checks.
    pub fn summary(&self) -> String {
        let mut s = format!("study {} (config {})\n", self.study, &self.config_hash[..12]);
        for series in &self.series {
            s.push_str(&format!("  {}\n", series.label));
            for r in &series.rows {
                s.push_str(&format!(
                    "    level {:>6.2}  error {:.4e} +- {:.1e}\n",
                    r.level, r.error_rms, r.stderr
                ));
            }
            if let Some(f) = series.fit {
                s.push_str(&format!(
                    "    slope {:.3} [{:.3}, {:.3}] from {} points",
                    f.slope, f.ci_lo, f.ci_hi, f.points
                ));
                if let Some((t, tol)) = series.target {
                    s.push_str(&format!(", target {t:.3} +- {tol}"));
                }
                s.push('\n');
            }
        }
        for (name, v) in &self.values {
            s.push_str(&format!("  {name} = {v:.6e}\n"));
        }
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            s.push_str(&format!("  [{tag}] {}: {}\n", c.name, c.detail));
        }
        s
    }

    /// Writes `report.csv`, `stats.csv` and `config_echo.txt` into `dir`.
    pub fn write_outputs(&self, dir: &Path, config: &StudyConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(fs::File::create(dir.join("report.csv"))?)?;
        let runs: Vec<(u64, &[StepStats])> = self.stats.iter().map(|(id, s)| (*id, s.as_slice())).collect();
        write_stats_csv(fs::File::create(dir.join("stats.csv"))?, true, &runs)?;
        let mut echo = config.echo();
        echo.push_str(&format!(
            "# config_hash = {}\n# version = {}\n",
            self.config_hash, self.version
        ));
        for s in &self.series {
            if let Some((t, tol)) = s.target {
                echo.push_str(&format!("# target {} slope = {t} +- {tol}\n", s.label));
            }
        }
        for c in &self.checks {
            echo.push_str(&format!("# check {} = {}\n", c.name, c.detail));
        }
        fs::write(dir.join("config_echo.txt"), echo)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::StudyKind;

    #[test]
    fn rms_of_constant() {
        let e = rms(&[2.0; 10]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn rms_stderr_shrinks_with_samples() {
        let a: Vec<f64> = (0..16).map(|i| 1.0 + (i % 3) as f64).collect();
        let b: Vec<f64> = (0..256).map(|i| 1.0 + (i % 3) as f64).collect();
        assert!(rms(&b).stderr < rms(&a).stderr / 3.0);
    }

    #[test]
    fn max_of_rms_versus_rms_of_max() {
        let paths = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let s = summarize(&paths).unwrap();
        assert!((s.max_of_rms.value - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.argmax, 1);
        assert_eq!(s.rms_of_max.value, 1.0);
        assert!(s.rms_of_max.value >= s.max_of_rms.value);
        assert!(summarize(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_and_outputs() {
        let cfg = StudyConfig::defaults(StudyKind::Hoelder);
        let mut r = RateReport::new("hoelder", &cfg);
        let rows = (0..4)
            .map(|i| {
                ReportRow::from_estimate(
                    f64::from(i),
                    McEstimate {
                        value: 0.5f64.powi(i),
                        stderr: 0.0,
                    },
                )
            })
            .collect();
        r.series
            .push(Series::new("hoelder", rows).fitted(Some((1.0, 0.1))));
        assert_eq!(r.series("hoelder").unwrap().slope_ok(), Some(true));
        assert!(r.passed());
        let dir = tempfile::tempdir().unwrap();
        r.write_outputs(dir.path(), &cfg).unwrap();
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv.starts_with("study,level,error_rms,stderr,slope,slope_ci_lo,slope_ci_hi\n"));
        assert_eq!(csv.lines().count(), 5);
        let echo = fs::read_to_string(dir.path().join("config_echo.txt")).unwrap();
        assert!(echo.contains("# target hoelder slope = 1 +- 0.1"));
    }
}
