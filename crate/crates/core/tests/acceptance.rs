//! Acceptance suite: one PASS/FAIL line per criterion, run at full scale.
//!
//! `SHEQ_ACCEPTANCE_ONLY=3,4` restricts the run to the listed criteria.
//! Reports of every study land in `$CARGO_TARGET_TMPDIR/acceptance/`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sheq_core::experiments::{
    default_rho, run_study, scalar_sum_check, RateReport, StudyConfig, StudyKind, SCALAR_SUM_TOL,
};
use sheq_core::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

fn config(kind: StudyKind, beta: f64) -> StudyConfig {
    let mut cfg = StudyConfig::defaults(kind);
    cfg.beta = beta;
    cfg.rho = default_rho(beta);
    cfg
}

fn run(cfg: &StudyConfig, tag: &str) -> Result<RateReport> {
    let report = run_study(cfg)?;
    report.write_outputs(&out_dir(tag), cfg)?;
    Ok(report)
}

/// Fitted slope of `label` against its target, as text.
fn slope_text(report: &RateReport, label: &str) -> String {
    match report.series(label) {
        Some(s) => match (s.fit, s.target) {
            (Some(f), Some((t, tol))) => format!("{label} slope {:.3} (target {t} +- {tol})", f.slope),
            (Some(f), None) => format!("{label} slope {:.3}", f.slope),
            _ => format!("{label}: no fit"),
        },
        None => format!("{label}: missing"),
    }
}

fn failed_checks(report: &RateReport) -> Vec<String> {
    report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect()
}

fn outcome_of(report: &RateReport, labels: &[&str]) -> Outcome {
    let mut parts: Vec<String> = labels.iter().map(|l| slope_text(report, l)).collect();
    parts.extend(failed_checks(report));
    Outcome {
        passed: report.passed(),
        detail: parts.join("; "),
    }
}

fn per_beta(kind: StudyKind, betas: &[f64], label: &str, tag: &str) -> Result<Outcome> {
    let mut passed = true;
    let mut parts = Vec::new();
    for &beta in betas {
        let report = run(&config(kind, beta), &format!("{tag}-beta{beta}"))?;
        let o = outcome_of(&report, &[label]);
        passed &= o.passed;
        parts.push(format!("beta {beta}: {}", o.detail));
    }
    Ok(Outcome {
        passed,
        detail: parts.join(" | "),
    })
}

fn scalar_identities() -> Result<Outcome> {
    let (dev, bounded) = scalar_sum_check(100_000);
    Ok(Outcome {
        passed: dev <= SCALAR_SUM_TOL && bounded,
        detail: format!(
            "max deviation {dev:.2e} (tol {SCALAR_SUM_TOL:e}), partial sums <= 1/(2 lambda): {bounded}"
        ),
    })
}

fn basis_suite() -> Result<Outcome> {
    let report = run(&config(StudyKind::BasisCheck, 1.0), "basis-check")?;
    let mut o = outcome_of(&report, &["ritz-parabola", "ritz-sine"]);
    o.detail = format!(
        "biorthogonality {:.1e}, round trip {:.1e}; {}",
        report.value("biorthogonality_defect").unwrap_or(f64::NAN),
        report.value("round_trip_error").unwrap_or(f64::NAN),
        o.detail
    );
    Ok(o)
}

fn single(kind: StudyKind, tag: &str, labels: &[&str]) -> Result<Outcome> {
    let report = run(&config(kind, 1.0), tag)?;
    let mut o = outcome_of(&report, labels);
    let passed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !passed.is_empty() {
        let ok = format!("{} ok", passed.join(", "));
        o.detail = if o.detail.is_empty() {
            ok
        } else {
            format!("{ok}; {}", o.detail)
        };
    }
    Ok(o)
}

type Criterion = (u32, &'static str, Duration, Box<dyn Fn() -> Result<Outcome>>);

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "scalar resolvent identities",
            Duration::from_secs(1),
            Box::new(scalar_identities),
        ),
        (2, "basis suite", Duration::from_secs(30), Box::new(basis_suite)),
        (
            3,
            "spatial rate",
            min(15),
            Box::new(|| per_beta(StudyKind::Space, &[0.5, 1.0, 2.0], "space", "space")),
        ),
        (
            4,
            "temporal rate",
            min(20),
            Box::new(|| per_beta(StudyKind::Time, &[0.5, 1.0], "time", "time")),
        ),
        (
            5,
            "hoelder exponent",
            min(2),
            Box::new(|| per_beta(StudyKind::Hoelder, &[0.5, 1.0], "hoelder", "hoelder")),
        ),
        (
            6,
            "adaptive solve contract",
            min(5),
            Box::new(|| single(StudyKind::SolveContract, "solve-contract", &[])),
        ),
        (
            7,
            "tolerance accumulation",
            min(5),
            Box::new(|| single(StudyKind::Tolerance, "tol", &[])),
        ),
        (
            8,
            "gronwall perturbation",
            min(5),
            Box::new(|| single(StudyKind::Gronwall, "gronwall", &[])),
        ),
        (
            9,
            "full-pipeline dominance matrix",
            min(15),
            Box::new(|| single(StudyKind::Full, "full", &["full/balanced"])),
        ),
    ];

    let only: Option<Vec<u32>> = std::env::var("SHEQ_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut all_passed = true;
    for (id, name, budget, check) in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all_passed &= passed;
        let tag = if passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {id} ({name}) in {:.1}s (budget {}s): {detail}",
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
