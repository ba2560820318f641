//! `sheq`: runs one convergence study and writes `report.csv`, `stats.csv`
//! and `config_echo.txt` into the output directory.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sheq_core::experiments::{run_study, StudyConfig, StudyKind};

#[derive(Parser)]
#[command(
    name = "sheq",
    version,
    about = "Monte Carlo convergence studies for the stochastic heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal rate of spectral backward Euler against a fine reference.
    RatesTime(RunArgs),
    /// Spatial rate of the multiresolution linear solver.
    RatesSpace(RunArgs),
    /// Growth of the adaptive error with the summed tolerances.
    RatesTol(RunArgs),
    /// Mean-square Hoelder exponent of the stochastic convolution.
    Hoelder(RunArgs),
    /// Perturbation bound for the nonlinear part.
    Gronwall(RunArgs),
    /// Complete pipeline: dominance rows and balanced sweep.
    Full(RunArgs),
    /// Wavelet basis, transform and Ritz projection checks.
    BasisCheck(RunArgs),
    /// Per-step accuracy of the adaptive solver against a dense solve.
    SolveContract(RunArgs),
    /// Prints the default configuration of a study.
    Defaults {
        /// Study name, e.g. `rates-time`.
        study: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed of the path streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    samples: Option<usize>,
    /// Directory for the report files.
    #[arg(long, default_value = "sheq-out")]
    out_dir: PathBuf,
    /// Extra `key=value` settings applied after the configuration file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Exit with status 2 when a check or slope target fails.
    #[arg(long)]
    strict: bool,
}

impl Command {
    fn study(&self) -> Option<StudyKind> {
        Some(match self {
            Command::RatesTime(_) => StudyKind::Time,
            Command::RatesSpace(_) => StudyKind::Space,
            Command::RatesTol(_) => StudyKind::Tolerance,
            Command::Hoelder(_) => StudyKind::Hoelder,
            Command::Gronwall(_) => StudyKind::Gronwall,
            Command::Full(_) => StudyKind::Full,
            Command::BasisCheck(_) => StudyKind::BasisCheck,
            Command::SolveContract(_) => StudyKind::SolveContract,
            Command::Defaults { .. } => return None,
        })
    }
}

fn build_config(kind: StudyKind, args: &RunArgs) -> Result<StudyConfig> {
    let mut text = match &args.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    for kv in &args.overrides {
        if !kv.contains('=') {
            bail!("--set expects KEY=VALUE, got '{kv}'");
        }
        text.push('\n');
        text.push_str(kv);
    }
    if let Some(seed) = args.seed {
        text.push_str(&format!("\nseed = {seed}"));
    }
    if let Some(samples) = args.samples {
        text.push_str(&format!("\nsamples = {samples}"));
    }
    let cfg = StudyConfig::parse(&text, Some(kind)).context("invalid configuration")?;
    if cfg.study != kind {
        bail!(
            "configuration names study '{}' but the subcommand runs '{}'",
            cfg.study.name(),
            kind.name()
        );
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let kind = match (&cli.command, cli.command.study()) {
        (Command::Defaults { study }, _) => {
            let kind: StudyKind = study.parse()?;
            print!("{}", StudyConfig::defaults(kind).echo());
            return Ok(ExitCode::SUCCESS);
        }
        (_, Some(kind)) => kind,
        (_, None) => unreachable!("every run command names a study"),
    };
    let args = match cli.command {
        Command::RatesTime(a)
        | Command::RatesSpace(a)
        | Command::RatesTol(a)
        | Command::Hoelder(a)
        | Command::Gronwall(a)
        | Command::Full(a)
        | Command::BasisCheck(a)
        | Command::SolveContract(a) => a,
        Command::Defaults { .. } => unreachable!(),
    };
    let cfg = build_config(kind, &args)?;
    let report = run_study(&cfg)?;
    report
        .write_outputs(&args.out_dir, &cfg)
        .with_context(|| format!("writing reports to {}", args.out_dir.display()))?;
    println!("{}", report.summary());
    println!("reports written to {}", args.out_dir.display());
    if args.strict && !report.passed() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
