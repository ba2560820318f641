use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sheq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheq"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("sheq runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out-dir", out]);
    sheq(&all)
}

#[test]
fn hoelder_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["hoelder", "--samples", "8", "--set", "k_modes=64"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.csv", "stats.csv", "config_echo.txt"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "study,level,error_rms,stderr,slope,slope_ci_lo,slope_ci_hi"
    );
    let echo = fs::read_to_string(dir.path().join("config_echo.txt")).unwrap();
    assert!(echo.contains("samples = 8"));
    assert!(echo.contains("config_hash"));
}

#[test]
fn same_seed_same_report() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "rates-space",
        "--samples",
        "3",
        "--seed",
        "11",
        "--set",
        "levels=3,4,5",
        "--set",
        "k_modes=64",
    ];
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    let read = |d: &Path| fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(
        &cfg,
        "# tiny run\nsamples = 2\nlevels = 7\nsteps = 8\neps_total = 0.1, 0.01, 0.001\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["rates-tol", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    // header plus 2 paths x 3 schedules x 8 steps
    assert_eq!(stats.lines().count(), 1 + 2 * 3 * 8);
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(&cfg, "samples = 50\nseed = 1\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "hoelder",
            "--config",
            cfg.to_str().unwrap(),
            "--samples",
            "4",
            "--seed",
            "9",
        ],
    );
    assert!(out.status.success());
    let echo = fs::read_to_string(dir.path().join("config_echo.txt")).unwrap();
    assert!(echo.contains("samples = 4"));
    assert!(echo.contains("seed = 9"));
}

#[test]
fn mismatched_study_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["full", "--set", "study=time"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("subcommand"));
}

#[test]
fn invalid_values_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["rates-time", "--set", "steps=8,12"]);
    assert!(!out.status.success());
    let out = run_in(dir.path(), &["rates-time", "--set", "beta"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KEY=VALUE"));
}

#[test]
fn strict_mode_flags_failed_targets() {
    // one path and a tolerance of 1e-4 cannot meet the slope target
    let dir = tempfile::tempdir().unwrap();
    let loose = run_in(
        dir.path(),
        &[
            "hoelder",
            "--samples",
            "1",
            "--set",
            "lags=2,3,4",
            "--set",
            "slope_tol=0.0001",
        ],
    );
    assert!(loose.status.success());
    let strict = run_in(
        dir.path(),
        &[
            "hoelder",
            "--samples",
            "1",
            "--set",
            "lags=2,3,4",
            "--set",
            "slope_tol=0.0001",
            "--strict",
        ],
    );
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn defaults_print_a_parseable_config() {
    let out = sheq(&["defaults", "rates-time"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("study = time"));
    assert!(text.contains("initial = zero"));
}
