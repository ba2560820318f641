//! Monte Carlo convergence studies, rate fits and report files.
//!
//! Every study is a pure function of its [`StudyConfig`]: paths are keyed
//! by `(seed, path index)`, distributed over the rayon pool and merged in
//! index order, so reruns are bit-identical.

mod config;
mod fit;
mod linear_studies;
mod nonlinear_studies;
mod report;

use rayon::prelude::*;

pub use config::{default_rho, InitialValue, StudyConfig, StudyKind};
pub use fit::{fit_line, fit_rate, fit_rate_filtered, LineFit, NOISE_FRACTION};
pub use linear_studies::{
    basis_check, hoelder_study, scalar_sum_check, space_steps, space_study, BIORTHOGONALITY_TOL,
    ROUND_TRIP_TOL, SCALAR_SUM_TOL,
};
pub use nonlinear_studies::{
    balanced_eps, balanced_level, full_study, gronwall_constant, gronwall_study, propagation_factor,
    solve_contract_study, time_study, tolerance_study, CERTIFICATE_MARGIN, GRONWALL_SPREAD, PLATEAU_FACTOR,
    SUPPORT_FIT_R2,
};
pub use report::{rms, summarize, Check, ErrorSummary, McEstimate, RateReport, ReportRow, Series};

use crate::error::Result;
use crate::noise::CovarianceSpec;

impl StudyConfig {
    /// Noise covariance of the study.
    pub fn covariance(&self) -> Result<CovarianceSpec> {
        CovarianceSpec::with_amplitude(self.rho, self.amplitude, self.k_modes, self.beta)
    }
}

/// Seed of path `index` under `base`.
pub fn path_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `f` for every index in `0..count` on the rayon pool, in index order.
pub fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

fn for_each_path<T: Send>(cfg: &StudyConfig, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    par_map(cfg.samples, f)
}

/// Runs the study named in the configuration.
pub fn run_study(cfg: &StudyConfig) -> Result<RateReport> {
    cfg.validate()?;
    log::info!(
        "running {} study (config {})",
        cfg.study.name(),
        &cfg.hash()[..12]
    );
    match cfg.study {
        StudyKind::Time => time_study(cfg),
        StudyKind::Space => space_study(cfg),
        StudyKind::Tolerance => tolerance_study(cfg),
        StudyKind::Hoelder => hoelder_study(cfg),
        StudyKind::Gronwall => gronwall_study(cfg),
        StudyKind::Full => full_study(cfg),
        StudyKind::BasisCheck => basis_check(cfg),
        StudyKind::SolveContract => solve_contract_study(cfg),
    }
}
