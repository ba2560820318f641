//! Studies involving the nonlinearity: temporal rate, tolerance
//! accumulation, the Gronwall perturbation bound, the full pipeline and the
//! per-step solver contract.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::StudyConfig;
use super::fit::fit_line;
use super::report::{rms, summarize, Check, ErrorSummary, McEstimate, RateReport, ReportRow, Series};
use super::{for_each_path, par_map, path_seed};
use crate::adaptive::{
    run_nonlinear, step_vbar, DenseStepSolver, PreconditionedOperator, SolverSettings, StepStats,
    ToleranceSchedule,
};
use crate::error::{Result, SheqError};
use crate::grid::TimeGrid;
use crate::linear::{run_linear, spectral_discrete_reference, MrErrorNorm};
use crate::noise::NoisePath;
use crate::spectral::{spectral_backward_euler, ModelParams, SpectralField, MIN_REFERENCE_FACTOR};
use crate::wavelet::{project_pj, ModeCoupling, WaveletCoeffs};

/// Fine-grid states at the nodes of `study`, after checking that `fine` is a
/// bridge refinement of it by at least [`MIN_REFERENCE_FACTOR`].
fn reference_at(
    study: &NoisePath,
    fine: &NoisePath,
    fine_states: &[SpectralField],
) -> Result<Vec<SpectralField>> {
    let factor = study.check_refines_to(fine)?;
    if factor < MIN_REFERENCE_FACTOR {
        return Err(SheqError::InconsistentRefinement(format!(
            "reference grid only {factor}x finer than the study grid (need >= {MIN_REFERENCE_FACTOR})"
        )));
    }
    Ok(fine_states.iter().step_by(factor).cloned().collect())
}

fn refined(base: &NoisePath, steps: usize) -> Result<NoisePath> {
    let n0 = base.grid().steps();
    if steps == n0 {
        Ok(base.clone())
    } else {
        base.refine(steps / n0)
    }
}

fn column(per_path: &[Vec<Vec<f64>>], i: usize) -> Vec<Vec<f64>> {
    per_path.iter().map(|p| p[i].clone()).collect()
}

/// Spectral backward Euler for `N` in the ladder against a reference run on
/// a grid `ref_factor` times finer than the finest `N`; all grids come from
/// one coarse path by bridge refinement.
pub fn time_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let params = ModelParams::new(cfg.k_modes, cfg.nonlinearity)?;
    let u0 = cfg.initial.spectral(cfg.k_modes);
    let n0 = cfg.steps[0];
    let fine_steps = cfg.steps[cfg.steps.len() - 1] * cfg.ref_factor;
    let per_path = for_each_path(cfg, |p| {
        let base = NoisePath::sample(&spec, &TimeGrid::new(cfg.t_final, n0)?, path_seed(cfg.seed, p));
        let fine = refined(&base, fine_steps)?;
        let fine_states = spectral_backward_euler(&params, fine.grid(), &fine, &u0)?.states;
        cfg.steps
            .iter()
            .map(|&n| {
                let path = refined(&base, n)?;
                let reference = reference_at(&path, &fine, &fine_states)?;
                let traj = spectral_backward_euler(&params, path.grid(), &path, &u0)?;
                Ok(traj
                    .states
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| a.sub(b).l2_norm())
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;
    let rows = cfg
        .steps
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            Ok(ReportRow::from_summary(
                (n as f64).log2(),
                &summarize(&column(&per_path, i))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RateReport::new("time", cfg);
    report
        .series
        .push(Series::new("time", rows).fitted(cfg.slope_target().map(|t| (t, cfg.slope_tol))));
    Ok(report)
}

/// `(1 - tau L)^-N`, the propagation factor of per-step errors.
pub fn propagation_factor(tau: f64, lipschitz: f64, steps: usize) -> f64 {
    (1.0 - tau * lipschitz).powi(-(steps as i32))
}

/// Safety margin on the accumulated-tolerance certificate.
pub const CERTIFICATE_MARGIN: f64 = 2.0;

/// Adaptive trajectories for a sweep of `sum_n eps_n` against the dense
/// solution of the same level-`J` scheme on common paths.
pub fn tolerance_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let j = cfg.levels[0];
    let n = cfg.steps[0];
    let grid = TimeGrid::new(cfg.t_final, n)?;
    let op = PreconditionedOperator::new(j, grid.tau())?;
    let dense = DenseStepSolver::new(j, grid.tau(), cfg.nonlinearity)?;
    let v0 = project_pj(&cfg.initial.spectral(cfg.k_modes), j)?;
    let settings = SolverSettings::default();
    let schedules = cfg
        .eps_total
        .iter()
        .map(|&e| ToleranceSchedule::uniform(e, n, cfg.eta_rule))
        .collect::<Result<Vec<_>>>()?;
    let per_path = for_each_path(cfg, |p| {
        let path = NoisePath::sample(&spec, &grid, path_seed(cfg.seed, p));
        let w = run_linear(&grid, &path, j)?.states;
        let vbar = dense.run(&v0, &w)?;
        schedules
            .iter()
            .map(|s| {
                let run = run_nonlinear(&op, cfg.nonlinearity, &v0, &w, &grid, s, &settings)?;
                let errs: Vec<f64> = run
                    .v
                    .iter()
                    .zip(&vbar)
                    .map(|(a, b)| dense.distance(a, b))
                    .collect();
                Ok((errs, run.stats))
            })
            .collect::<Result<Vec<(Vec<f64>, Vec<StepStats>)>>>()
    })?;
    let mut report = RateReport::new("tol", cfg);
    let mut summaries = Vec::new();
    let mut worst_path_max = vec![0.0f64; schedules.len()];
    for (i, s) in schedules.iter().enumerate() {
        let errs: Vec<Vec<f64>> = per_path.iter().map(|p| p[i].0.clone()).collect();
        for e in &errs {
            worst_path_max[i] = worst_path_max[i].max(e.iter().copied().fold(0.0, f64::max));
        }
        summaries.push((s.total(), summarize(&errs)?));
    }
    for (p, runs) in per_path.into_iter().enumerate() {
        for (i, (_, stats)) in runs.into_iter().enumerate() {
            report.stats.push(((p * 1000 + i) as u64, stats));
        }
    }
    let rows: Vec<ReportRow> = summaries
        .iter()
        .map(|(total, s)| ReportRow::from_summary(-total.log2(), s))
        .collect();

    // pairwise: reducing the tolerances by r changes the error by a factor in [0.6 r, 1]
    let mut pair_ok = true;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    let mut plateau_at = None;
    for (k, w) in summaries.windows(2).enumerate() {
        let r = w[1].0 / w[0].0;
        let q = w[1].1.max_of_rms.value / w[0].1.max_of_rms.value;
        worst = (worst.0.min(q / r), worst.1.max(q));
        pair_ok &= q <= 1.0 && q >= 0.6 * r;
        if q > 0.9 && plateau_at.is_none() {
            plateau_at = Some(k + 1);
        }
    }
    report.checks.push(Check::new(
        "pairwise-ratio",
        pair_ok,
        format!(
            "error ratios within [0.6 r, 1]: smallest ratio/r {:.3}, largest ratio {:.3}",
            worst.0, worst.1
        ),
    ));
    let factor = propagation_factor(grid.tau(), cfg.nonlinearity.lipschitz(), n);
    let mut cert_ok = true;
    let mut cert_worst = 0.0f64;
    for (i, (total, _)) in summaries.iter().enumerate() {
        let bound = CERTIFICATE_MARGIN * factor * total;
        cert_worst = cert_worst.max(worst_path_max[i] / bound);
        cert_ok &= worst_path_max[i] <= bound;
    }
    report.values.push(("propagation_factor".into(), factor));
    report.values.push(("certificate_utilization".into(), cert_worst));
    report.checks.push(Check::new(
        "certificate",
        cert_ok,
        format!("largest per-path max error / (2 (1 - tau L)^-N sum eps) = {cert_worst:.3e}"),
    ));
    report.checks.push(Check::new(
        "tolerance-dominant",
        plateau_at.is_none(),
        match plateau_at {
            None => "no plateau in the sweep".to_string(),
            Some(k) => format!(
                "plateau from sum eps = {:.3e}: below the solver floor",
                summaries[k].0
            ),
        },
    ));
    let x: Vec<f64> = summaries.iter().map(|(t, _)| t.log2()).collect();
    let y: Vec<f64> = summaries.iter().map(|(_, s)| s.max_of_rms.value.log2()).collect();
    if let Ok(f) = fit_line(&x, &y) {
        report
            .values
            .push(("error_vs_tolerance_exponent".into(), f.slope));
    }
    report.series.push(Series::new("tol", rows));
    Ok(report)
}

/// `2 L T e^{2 L T}`.
pub fn gronwall_constant(lipschitz: f64, t_final: f64) -> f64 {
    2.0 * lipschitz * t_final * (2.0 * lipschitz * t_final).exp()
}

/// Largest accepted spread `max / min` of the perturbation ratio over levels.
pub const GRONWALL_SPREAD: f64 = 4.0;

fn spectral_run(
    params: &ModelParams,
    tau: f64,
    u0: &SpectralField,
    shifts: &[SpectralField],
) -> Result<Vec<SpectralField>> {
    let mut out = vec![u0.clone()];
    for (n, shift) in shifts.iter().enumerate().skip(1) {
        let prev = &out[n - 1];
        let (v, _) = params
            .implicit_solve(tau, prev, Some(shift), prev)
            .map_err(|e| e.at_step(n))?;
        out.push(v);
    }
    Ok(out)
}

fn ratio_estimate(num: McEstimate, den: McEstimate) -> McEstimate {
    let value = num.value / den.value;
    let rel = ((num.stderr / num.value).powi(2) + (den.stderr / den.value).powi(2)).sqrt();
    McEstimate {
        value,
        stderr: value * rel,
    }
}

/// Perturbation of `v` by the linear part: `v` driven by the spectral `w`
/// versus `v-bar` driven by `P_K w_J`, both solved in the eigenbasis.
pub fn gronwall_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let params = ModelParams::new(cfg.k_modes, cfg.nonlinearity)?;
    let grid = TimeGrid::new(cfg.t_final, cfg.steps[0])?;
    let u0 = cfg.initial.spectral(cfg.k_modes);
    let couplings = cfg
        .levels
        .iter()
        .map(|&j| ModeCoupling::new(j, cfg.k_modes))
        .collect::<Result<Vec<_>>>()?;
    let per_path = for_each_path(cfg, |p| {
        let path = NoisePath::sample(&spec, &grid, path_seed(cfg.seed, p));
        let w = spectral_discrete_reference(&grid, &path)?;
        let v = spectral_run(&params, grid.tau(), &u0, &w)?;
        cfg.levels
            .iter()
            .zip(&couplings)
            .map(|(&j, coupling)| {
                let wj: Vec<SpectralField> = run_linear(&grid, &path, j)?
                    .states
                    .iter()
                    .map(|s| coupling.to_spectral(s))
                    .collect();
                let vbar = spectral_run(&params, grid.tau(), &u0, &wj)?;
                let dv = vbar.iter().zip(&v).map(|(a, b)| a.sub(b).l2_norm()).collect();
                let dw = wj.iter().zip(&w).map(|(a, b)| a.sub(b).l2_norm()).collect();
                Ok((dv, dw))
            })
            .collect::<Result<Vec<(Vec<f64>, Vec<f64>)>>>()
    })?;
    let constant = gronwall_constant(cfg.nonlinearity.lipschitz(), cfg.t_final);
    let (mut rv, mut rw, mut rr) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &j) in cfg.levels.iter().enumerate() {
        let dv: Vec<Vec<f64>> = per_path.iter().map(|p| p[i].0.clone()).collect();
        let dw: Vec<Vec<f64>> = per_path.iter().map(|p| p[i].1.clone()).collect();
        let (sv, sw) = (summarize(&dv)?, summarize(&dw)?);
        let level = f64::from(j);
        rv.push(ReportRow::from_summary(level, &sv));
        rw.push(ReportRow::from_summary(level, &sw));
        rr.push(ReportRow::from_estimate(
            level,
            ratio_estimate(sv.max_of_rms, sw.max_of_rms),
        ));
    }
    let ratios: Vec<f64> = rr.iter().map(|r| r.error_rms).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mut report = RateReport::new("gronwall", cfg);
    report.values.push(("gronwall_constant".into(), constant));
    report.values.push(("max_ratio".into(), max_ratio));
    report.checks.push(Check::new(
        "ratio-below-constant",
        max_ratio <= constant,
        format!("max_J ratio {max_ratio:.3e} vs 2 L T e^(2 L T) = {constant:.3}"),
    ));
    report.checks.push(Check::new(
        "ratio-stable",
        max_ratio <= GRONWALL_SPREAD * min_ratio,
        format!(
            "ratio spread over levels {:.2} (limit {GRONWALL_SPREAD})",
            max_ratio / min_ratio
        ),
    ));
    report.series.push(Series::new("gronwall/v", rv));
    report.series.push(Series::new("gronwall/w", rw).fitted(None));
    report.series.push(Series::new("gronwall/ratio", rr));
    Ok(report)
}

/// Level paired with `N` in the balanced sweep: one level finer per factor
/// 4 in `N`, starting one level above the coarsest.
pub fn balanced_level(cfg: &StudyConfig, n: usize) -> u32 {
    let octaves = (n / cfg.steps[0]).trailing_zeros();
    cfg.levels[0] + octaves.div_ceil(2) + 1
}

/// `sum eps_n` paired with `N` in the balanced sweep, shrinking like `tau^(1/2)`.
pub fn balanced_eps(cfg: &StudyConfig, n: usize) -> f64 {
    cfg.eps_balanced * (cfg.steps[0] as f64 / n as f64).sqrt()
}

/// Accepted factor between a measured plateau and its prediction.
pub const PLATEAU_FACTOR: f64 = 1.5;

/// Bootstrap resamples used for paired row comparisons.
const BOOTSTRAP_DRAWS: usize = 256;

fn max_of_rms(errs: &[Vec<f64>], pick: &[usize]) -> f64 {
    let steps = errs[0].len();
    (0..steps)
        .map(|n| {
            let s: f64 = pick.iter().map(|&p| errs[p][n] * errs[p][n]).sum();
            (s / pick.len() as f64).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Drop `E(a) - E(b)` of the max-of-RMS error between two runs on common
/// paths, with its standard error from a paired bootstrap over paths.
fn paired_drop(a: &[Vec<f64>], b: &[Vec<f64>], seed: u64) -> (f64, f64) {
    let all: Vec<usize> = (0..a.len()).collect();
    let drop = max_of_rms(a, &all) - max_of_rms(b, &all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..BOOTSTRAP_DRAWS)
        .map(|_| {
            let pick: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..a.len())).collect();
            max_of_rms(a, &pick) - max_of_rms(b, &pick)
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    (drop, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct RunKey {
    steps: usize,
    level: u32,
    eps_bits: u64,
}

impl RunKey {
    fn new(steps: usize, level: u32, eps: f64) -> Self {
        Self {
            steps,
            level,
            eps_bits: eps.to_bits(),
        }
    }

    fn eps(&self) -> f64 {
        f64::from_bits(self.eps_bits)
    }
}

/// The complete pipeline `u_eps^n = v_eps^n + w_J^n` against the reference.
///
/// Each row refines one of `(tau, J, eps)` from its coarsest value while the
/// other two knobs are held where they leave a visible floor: the `tau` row
/// at the coarsest level and loosest tolerance, the level and tolerance rows
/// at the finest step with the other knob at its finest value. The error
/// splits exactly into a time term (spectral Euler against the reference), a
/// space term (dense level-`J` scheme against spectral Euler) and a
/// tolerance term (adaptive against dense); each term is measured on its own
/// and the plateau of a row is predicted as the root sum of squares of the
/// two terms it does not refine. The balanced sweep refines all three.
pub fn full_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let params = ModelParams::new(cfg.k_modes, cfg.nonlinearity)?;
    let u0 = cfg.initial.spectral(cfg.k_modes);
    let (n0, nf) = (cfg.steps[0], cfg.steps[cfg.steps.len() - 1]);
    let (j0, jf) = (cfg.levels[0], cfg.levels[cfg.levels.len() - 1]);
    let (e0, ef) = (cfg.eps_total[0], cfg.eps_total[cfg.eps_total.len() - 1]);

    let rows_tau: Vec<RunKey> = cfg.steps.iter().map(|&n| RunKey::new(n, j0, e0)).collect();
    let rows_level: Vec<RunKey> = cfg.levels.iter().map(|&j| RunKey::new(nf, j, ef)).collect();
    let rows_eps: Vec<RunKey> = cfg.eps_total.iter().map(|&e| RunKey::new(nf, jf, e)).collect();
    let rows_bal: Vec<RunKey> = cfg
        .steps
        .iter()
        .map(|&n| RunKey::new(n, balanced_level(cfg, n), balanced_eps(cfg, n)))
        .collect();
    let tau_floor = RunKey::new(nf, j0, e0);
    let fine_floor = RunKey::new(nf, jf, ef);
    let mut keys: Vec<RunKey> = Vec::new();
    for k in rows_tau
        .iter()
        .chain(&rows_level)
        .chain(&rows_eps)
        .chain(&rows_bal)
    {
        if !keys.contains(k) {
            keys.push(*k);
        }
    }
    let mut ops: HashMap<(u32, usize), PreconditionedOperator> = HashMap::new();
    let mut norms: HashMap<u32, MrErrorNorm> = HashMap::new();
    let mut v0s: HashMap<u32, Vec<f64>> = HashMap::new();
    for k in &keys {
        if let Entry::Vacant(e) = ops.entry((k.level, k.steps)) {
            e.insert(PreconditionedOperator::new(
                k.level,
                cfg.t_final / k.steps as f64,
            )?);
        }
        if let Entry::Vacant(e) = norms.entry(k.level) {
            e.insert(MrErrorNorm::new(k.level, cfg.k_modes)?);
            v0s.insert(k.level, project_pj(&u0, k.level)?);
        }
    }
    let tau_f = cfg.t_final / nf as f64;
    let dense = [
        DenseStepSolver::new(j0, tau_f, cfg.nonlinearity)?,
        DenseStepSolver::new(jf, tau_f, cfg.nonlinearity)?,
    ];
    let fine_steps = nf * cfg.ref_factor;
    let settings = SolverSettings::default();
    let bal_last = *rows_bal.last().expect("non-empty steps");

    // terms: time, space at j0, space at jf, tolerance at tau_floor, tolerance at fine_floor
    let per_path = for_each_path(cfg, |p| {
        let base = NoisePath::sample(&spec, &TimeGrid::new(cfg.t_final, n0)?, path_seed(cfg.seed, p));
        let fine = refined(&base, fine_steps)?;
        let fine_states = spectral_backward_euler(&params, fine.grid(), &fine, &u0)?.states;
        let mut out = HashMap::new();
        let mut stats = Vec::new();
        let mut floors = HashMap::new();
        for k in &keys {
            let path = refined(&base, k.steps)?;
            let reference = reference_at(&path, &fine, &fine_states)?;
            let grid = *path.grid();
            let w = run_linear(&grid, &path, k.level)?.states;
            let schedule = ToleranceSchedule::uniform(k.eps(), k.steps, cfg.eta_rule)?;
            let run = run_nonlinear(
                &ops[&(k.level, k.steps)],
                cfg.nonlinearity,
                &v0s[&k.level],
                &w,
                &grid,
                &schedule,
                &settings,
            )?;
            let norm = &norms[&k.level];
            let errs = run
                .u
                .iter()
                .zip(&reference)
                .map(|(u, r)| norm.distance(u, r))
                .collect::<Result<Vec<f64>>>()?;
            if *k == bal_last {
                stats = run.stats;
            }
            if *k == tau_floor || *k == fine_floor {
                floors.insert(*k, run.v);
            }
            out.insert(*k, errs);
        }

        let path = refined(&base, nf)?;
        let grid = *path.grid();
        let reference = reference_at(&path, &fine, &fine_states)?;
        let spectral = spectral_backward_euler(&params, &grid, &path, &u0)?.states;
        let time: Vec<f64> = spectral
            .iter()
            .zip(&reference)
            .map(|(a, b)| a.sub(b).l2_norm())
            .collect();
        let mut terms = vec![time];
        let mut tol_terms = Vec::new();
        for (solver, floor) in dense.iter().zip([tau_floor, fine_floor]) {
            let j = solver.level();
            let w = run_linear(&grid, &path, j)?.states;
            let vbar = solver.run(&v0s[&j], &w)?;
            let space = vbar
                .iter()
                .zip(&w)
                .zip(&spectral)
                .map(|((v, w), s)| {
                    let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
                    norms[&j].distance(&u, s)
                })
                .collect::<Result<Vec<f64>>>()?;
            terms.push(space);
            tol_terms.push(
                floors[&floor]
                    .iter()
                    .zip(&vbar)
                    .map(|(a, b)| solver.distance(a, b))
                    .collect(),
            );
        }
        terms.extend(tol_terms);
        Ok((out, stats, terms))
    })?;

    let summary = |k: &RunKey| -> Result<ErrorSummary> {
        let errs: Vec<Vec<f64>> = per_path.iter().map(|(m, _, _)| m[k].clone()).collect();
        summarize(&errs)
    };
    let mut report = RateReport::new("full", cfg);
    for (p, (_, stats, _)) in per_path.iter().enumerate() {
        report.stats.push((p as u64, stats.clone()));
    }
    let names = [
        format!("time_term_N{nf}"),
        format!("space_term_J{j0}"),
        format!("space_term_J{jf}"),
        format!("tolerance_term_J{j0}_eps{e0}"),
        format!("tolerance_term_J{jf}_eps{ef}"),
    ];
    let mut terms = Vec::with_capacity(names.len());
    for (i, name) in names.into_iter().enumerate() {
        let errs: Vec<Vec<f64>> = per_path.iter().map(|(_, _, t)| t[i].clone()).collect();
        let value = summarize(&errs)?.max_of_rms.value;
        report.values.push((name, value));
        terms.push(value);
    }
    let (t_time, s_coarse, s_fine, e_coarse, e_fine) = (terms[0], terms[1], terms[2], terms[3], terms[4]);

    let rows_of = |keys: &[RunKey], level: &dyn Fn(&RunKey) -> f64| -> Result<Vec<ReportRow>> {
        keys.iter()
            .map(|k| Ok(ReportRow::from_summary(level(k), &summary(k)?)))
            .collect()
    };
    let knobs: [(&str, &[RunKey], f64, Vec<ReportRow>); 3] = [
        (
            "tau",
            &rows_tau,
            s_coarse.hypot(e_coarse),
            rows_of(&rows_tau, &|k| (k.steps as f64).log2())?,
        ),
        (
            "level",
            &rows_level,
            t_time.hypot(e_fine),
            rows_of(&rows_level, &|k| f64::from(k.level))?,
        ),
        (
            "eps",
            &rows_eps,
            t_time.hypot(s_fine),
            rows_of(&rows_eps, &|k| -k.eps().log2())?,
        ),
    ];
    let errs_of = |k: &RunKey| -> Vec<Vec<f64>> { per_path.iter().map(|(m, _, _)| m[k].clone()).collect() };
    for (name, keys, predicted, rows) in knobs {
        let first = rows[0];
        let last = rows[rows.len() - 1];
        let prev = rows[rows.len() - 2];
        let (drop, drop_se) = paired_drop(&errs_of(&keys[0]), &errs_of(&keys[keys.len() - 1]), cfg.seed);
        let reduces = drop > 2.0 * drop_se;
        let monotone = keys.windows(2).all(|w| {
            let (d, se) = paired_drop(&errs_of(&w[0]), &errs_of(&w[1]), cfg.seed);
            d >= -2.0 * se
        });
        let plateau = last.error_rms >= 0.8 * prev.error_rms;
        let ratio = last.error_rms / predicted;
        let predicted_ok = (1.0 / PLATEAU_FACTOR..=PLATEAU_FACTOR).contains(&ratio);
        report.checks.push(Check::new(
            format!("{name}-row"),
            reduces && monotone && plateau && predicted_ok,
            format!(
                "error {:.3e} -> {:.3e} (paired drop {drop:.2e} +- {drop_se:.1e}); reduces {reduces}, \
                 monotone {monotone}, plateau {plateau}; plateau / prediction {:.3e} = {ratio:.2}",
                first.error_rms, last.error_rms, predicted
            ),
        ));
        report.series.push(Series::new(format!("full/{name}"), rows));
    }
    let bal = rows_of(&rows_bal, &|k| (k.steps as f64).log2())?;
    let decreasing = bal
        .windows(2)
        .all(|w| w[1].error_rms <= w[0].error_rms + 2.0 * w[0].stderr.hypot(w[1].stderr));
    report.checks.push(Check::new(
        "balanced-decreasing",
        decreasing,
        "total error decreases along the balanced sweep within Monte Carlo noise",
    ));
    report
        .series
        .push(Series::new("full/balanced", bal).fitted(cfg.slope_target().map(|t| (t, cfg.slope_tol))));
    Ok(report)
}

/// Smallest `R^2` accepted for the support-versus-tolerance power law.
pub const SUPPORT_FIT_R2: f64 = 0.9;

/// Step problems `(v^{n-1}, w_J^n)` taken at a random step of the dense
/// trajectory of a random path, solved adaptively for every tolerance and
/// compared with the dense solution of the same discrete equation.
pub fn solve_contract_study(cfg: &StudyConfig) -> Result<RateReport> {
    let spec = cfg.covariance()?;
    let j = cfg.levels[0];
    let grid = TimeGrid::new(cfg.t_final, cfg.steps[0])?;
    let op = PreconditionedOperator::new(j, grid.tau())?;
    let dense = DenseStepSolver::new(j, grid.tau(), cfg.nonlinearity)?;
    let settings = SolverSettings::default();
    let v0 = project_pj(&cfg.initial.spectral(cfg.k_modes), j)?;
    let results = par_map(cfg.problems, |i| {
        let seed = path_seed(cfg.seed, i);
        let path = NoisePath::sample(&spec, &grid, seed);
        let w = run_linear(&grid, &path, j)?.states;
        let vbar = dense.run(&v0, &w)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let n = rng.random_range(1..=grid.steps());
        let (v_prev, w) = (&vbar[n - 1], &w[n]);
        let (exact, _) = dense.step(v_prev, w, v_prev)?;
        cfg.eps_total
            .iter()
            .map(|&eps| {
                let out = step_vbar(
                    &op,
                    cfg.nonlinearity,
                    v_prev,
                    w,
                    eps,
                    &WaveletCoeffs::new_tree(),
                    cfg.eta_rule,
                    &settings,
                )?;
                Ok((dense.distance(&out.nodal, &exact), out.stats))
            })
            .collect::<Result<Vec<(f64, StepStats)>>>()
    })?;
    let mut report = RateReport::new("solve-contract", cfg);
    let mut within = 0usize;
    let mut certified = 0usize;
    let total = results.len() * cfg.eps_total.len();
    let mut err_rows = Vec::new();
    let mut supp_rows = Vec::new();
    let mut mean_ops = Vec::new();
    for (k, &eps) in cfg.eps_total.iter().enumerate() {
        let errs: Vec<f64> = results.iter().map(|r| r[k].0).collect();
        within += errs.iter().filter(|e| **e <= eps).count();
        certified += results.iter().filter(|r| r[k].0 <= r[k].1.error_bound).count();
        let level = -eps.log2();
        err_rows.push(ReportRow::from_estimate(level, rms(&errs)));
        let log_mean = results
            .iter()
            .map(|r| (r[k].1.support_size.max(1) as f64).ln())
            .sum::<f64>()
            / results.len() as f64;
        supp_rows.push(ReportRow::from_estimate(
            level,
            McEstimate {
                value: log_mean.exp(),
                stderr: 0.0,
            },
        ));
        mean_ops.push(results.iter().map(|r| r[k].1.op_count as f64).sum::<f64>() / results.len() as f64);
    }
    for (i, r) in results.iter().enumerate() {
        report.stats.push((i as u64, r.iter().map(|(_, s)| *s).collect()));
    }
    report.checks.push(Check::new(
        "contract",
        within == total,
        format!("{within} of {total} solves within eps"),
    ));
    report.checks.push(Check::new(
        "certificate",
        certified == total,
        format!("{certified} of {total} certified bounds above the true error"),
    ));
    let x: Vec<f64> = supp_rows.iter().map(|r| r.level).collect();
    let y: Vec<f64> = supp_rows.iter().map(|r| r.error_rms.log2()).collect();
    let fit = fit_line(&x, &y)?;
    report.values.push(("support_exponent".into(), fit.slope));
    report.values.push(("support_fit_r2".into(), fit.r_squared));
    report.values.push(("empirical_s".into(), 1.0 / fit.slope));
    report.checks.push(Check::new(
        "support-power-law",
        fit.r_squared >= SUPPORT_FIT_R2,
        format!(
            "support ~ eps^-{:.3}, R^2 = {:.3} (need {SUPPORT_FIT_R2})",
            fit.slope, fit.r_squared
        ),
    ));
    let monotone = mean_ops.windows(2).all(|w| w[1] >= w[0]);
    report.checks.push(Check::new(
        "monotone-work",
        monotone,
        format!(
            "mean operation counts {}",
            mean_ops
                .iter()
                .map(|o| format!("{o:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));
    report.series.push(Series::new("solve-contract/error", err_rows));
    report
        .series
        .push(Series::new("solve-contract/support", supp_rows));
    Ok(report)
}
