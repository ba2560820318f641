//! Line-oriented `key = value` study configuration.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Result, SheqError};
use crate::spectral::{Nonlinearity, SpectralField};
use crate::wavelet::ORDER;

/// Which study a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Time,
    Space,
    Tolerance,
    Hoelder,
    Gronwall,
    Full,
    BasisCheck,
    SolveContract,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        StudyKind::Time,
        StudyKind::Space,
        StudyKind::Tolerance,
        StudyKind::Hoelder,
        StudyKind::Gronwall,
        StudyKind::Full,
        StudyKind::BasisCheck,
        StudyKind::SolveContract,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Time => "time",
            StudyKind::Space => "space",
            StudyKind::Tolerance => "tol",
            StudyKind::Hoelder => "hoelder",
            StudyKind::Gronwall => "gronwall",
            StudyKind::Full => "full",
            StudyKind::BasisCheck => "basis-check",
            StudyKind::SolveContract => "solve-contract",
        }
    }
}

impl FromStr for StudyKind {
    type Err = SheqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time" | "rates-time" => Ok(StudyKind::Time),
            "space" | "rates-space" => Ok(StudyKind::Space),
            "tol" | "tolerance" | "rates-tol" => Ok(StudyKind::Tolerance),
            "hoelder" | "holder" => Ok(StudyKind::Hoelder),
            "gronwall" => Ok(StudyKind::Gronwall),
            "full" | "full-run" => Ok(StudyKind::Full),
            "basis-check" | "basis" => Ok(StudyKind::BasisCheck),
            "solve-contract" | "solve" => Ok(StudyKind::SolveContract),
            other => Err(SheqError::Config(format!("unknown study '{other}'"))),
        }
    }
}

/// Initial value `u_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialValue {
    Zero,
    /// `sin(pi x)`.
    Sine,
    /// `x (1 - x)`.
    Parabola,
}

impl InitialValue {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            InitialValue::Zero => 0.0,
            InitialValue::Sine => (std::f64::consts::PI * x).sin(),
            InitialValue::Parabola => x * (1.0 - x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitialValue::Zero => "zero",
            InitialValue::Sine => "sine",
            InitialValue::Parabola => "parabola",
        }
    }

    /// Eigen-coefficients of `u_0`; the parabola is expanded in closed form.
    pub fn spectral(self, k_modes: usize) -> SpectralField {
        match self {
            InitialValue::Zero => SpectralField::zeros(k_modes),
            InitialValue::Sine => SpectralField::mode(k_modes, 1, std::f64::consts::FRAC_1_SQRT_2),
            InitialValue::Parabola => {
                let pi = std::f64::consts::PI;
                // (x(1-x), sqrt2 sin(k pi x)) = 4 sqrt2 / (k pi)^3 for odd k
                let c = (1..=k_modes)
                    .map(|k| {
                        if k % 2 == 1 {
                            4.0 * std::f64::consts::SQRT_2 / (k as f64 * pi).powi(3)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                SpectralField::new(c).expect("finite coefficients")
            }
        }
    }
}

impl FromStr for InitialValue {
    type Err = SheqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(InitialValue::Zero),
            "sine" | "sin" => Ok(InitialValue::Sine),
            "parabola" => Ok(InitialValue::Parabola),
            other => Err(SheqError::Config(format!("unknown initial value '{other}'"))),
        }
    }
}

/// Covariance decay used for a regularity parameter when none is given.
///
/// For the standard suite the exponent sits just above the threshold
/// `2 beta - 1`; for `beta = 2` it is raised to 4 so that the spatial rate is
/// capped by the basis order rather than by the noise.
pub fn default_rho(beta: f64) -> f64 {
    const SUITE: [(f64, f64); 3] = [(0.5, 0.1), (1.0, 1.2), (2.0, 4.0)];
    SUITE
        .iter()
        .find(|(b, _)| (b - beta).abs() < 1e-12)
        .map(|(_, r)| *r)
        .unwrap_or((2.0 * beta - 1.0).max(0.0) + 0.2)
}

/// Everything a study needs; see the crate README for the key list.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub beta: f64,
    pub rho: f64,
    pub amplitude: f64,
    pub k_modes: usize,
    pub t_final: f64,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialValue,
    /// Mesh levels `J`.
    pub levels: Vec<u32>,
    /// Step counts `N`.
    pub steps: Vec<usize>,
    /// Tolerance sweep: `sum_n eps_n` per run, or the per-step tolerance in
    /// the solve-contract study.
    pub eps_total: Vec<f64>,
    /// `sum_n eps_n` at the coarsest step count of the balanced sweep.
    pub eps_balanced: f64,
    pub eta_rule: f64,
    pub samples: usize,
    pub seed: u64,
    /// Reference grid is this many times finer than the finest study grid.
    pub ref_factor: usize,
    /// Hoelder lags `2^-l`.
    pub lags: Vec<u32>,
    /// Space study couples `N_J = 4^J / space_coupling`.
    pub space_coupling: usize,
    /// Randomized problems in the solve-contract study.
    pub problems: usize,
    /// Accepted deviation of fitted slopes from their targets.
    pub slope_tol: f64,
}

fn halving(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start * 0.5f64.powi(i as i32)).collect()
}

impl StudyConfig {
    /// Defaults: `M = 128`, `T = 1`, `K = 512`, `beta = 1`, with study-specific
    /// ladders.
    pub fn defaults(study: StudyKind) -> Self {
        let mut c = Self {
            study,
            beta: 1.0,
            rho: default_rho(1.0),
            amplitude: 1.0,
            k_modes: 512,
            t_final: 1.0,
            nonlinearity: Nonlinearity::Sine,
            initial: InitialValue::Parabola,
            levels: vec![3, 4, 5, 6, 7, 8],
            steps: vec![8, 16, 32, 64, 128],
            eps_total: halving(0.1, 11),
            eps_balanced: 0.02,
            eta_rule: 0.8,
            samples: 128,
            seed: 20_240_917,
            ref_factor: 16,
            lags: (8..=16).collect(),
            space_coupling: 16,
            problems: 20,
            slope_tol: 0.15,
        };
        match study {
            StudyKind::Time => c.initial = InitialValue::Zero,
            StudyKind::Space => {
                c.nonlinearity = Nonlinearity::Zero;
                c.slope_tol = 0.25;
            }
            StudyKind::Tolerance => {
                c.levels = vec![7];
                c.steps = vec![32];
                c.samples = 32;
            }
            StudyKind::Hoelder => {
                c.nonlinearity = Nonlinearity::Zero;
                c.slope_tol = 0.1;
            }
            StudyKind::Gronwall => {
                c.levels = vec![3, 4, 5, 6, 7];
                c.steps = vec![32];
                c.samples = 64;
            }
            StudyKind::Full => {
                c.levels = vec![3, 4, 5, 6, 7];
                c.steps = vec![8, 16, 32, 64, 128, 256, 512];
                c.eps_total = vec![2.0, 0.5, 0.125, 0.031_25, 0.007_812_5];
                c.samples = 32;
                c.slope_tol = 0.2;
            }
            StudyKind::BasisCheck => {
                c.levels = (3..=9).collect();
                c.samples = 1;
            }
            StudyKind::SolveContract => {
                c.levels = vec![8];
                c.steps = vec![16];
                c.eps_total = vec![1e-2, 1e-3, 1e-4, 1e-5];
            }
        }
        c
    }

    /// Parses `key = value` lines on top of the defaults of the study named
    /// by the `study` key (or `fallback`). `#` starts a comment.
    pub fn parse(text: &str, fallback: Option<StudyKind>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SheqError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((lineno + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let study = match pairs.iter().find(|(_, k, _)| k == "study") {
            Some((_, _, v)) => v.parse()?,
            None => fallback.ok_or_else(|| SheqError::Config("no study given".into()))?,
        };
        let mut cfg = Self::defaults(study);
        let mut rho_given = false;
        for (lineno, key, value) in &pairs {
            cfg.set(key, value)
                .map_err(|e| SheqError::Config(format!("line {lineno}: {e}")))?;
            rho_given |= key == "rho";
        }
        if !rho_given {
            cfg.rho = default_rho(cfg.beta);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| SheqError::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "study" => self.study = value.parse()?,
            "beta" => self.beta = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "amplitude" => self.amplitude = num(key, value)?,
            "k_modes" => self.k_modes = num(key, value)?,
            "t_final" => self.t_final = num(key, value)?,
            "nonlinearity" => self.nonlinearity = Nonlinearity::parse(value)?,
            "initial" => self.initial = value.parse()?,
            "levels" => self.levels = list(key, value)?,
            "steps" => self.steps = list(key, value)?,
            "eps_total" => self.eps_total = list(key, value)?,
            "eps_balanced" => self.eps_balanced = num(key, value)?,
            "eta_rule" => self.eta_rule = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "ref_factor" => self.ref_factor = num(key, value)?,
            "lags" => self.lags = list(key, value)?,
            "space_coupling" => self.space_coupling = num(key, value)?,
            "problems" => self.problems = num(key, value)?,
            "slope_tol" => self.slope_tol = num(key, value)?,
            other => return Err(SheqError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SheqError::Config(m));
        if !(self.beta > 0.0) {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if self.amplitude > 0.0 && self.rho <= 2.0 * self.beta - 1.0 {
            return bad(format!(
                "rho = {} must exceed 2 beta - 1 = {}",
                self.rho,
                2.0 * self.beta - 1.0
            ));
        }
        if self.k_modes == 0 || self.samples == 0 {
            return bad("k_modes and samples must be positive".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be positive", self.t_final));
        }
        if self.steps.is_empty() || self.levels.is_empty() {
            return bad("steps and levels must be non-empty".into());
        }
        for w in self.steps.windows(2) {
            if w[1] <= w[0] {
                return bad("steps must be increasing".into());
            }
        }
        if let Some(n) = self.steps.iter().find(|n| !n.is_power_of_two()) {
            return bad(format!("step count {n} is not a power of two"));
        }
        let lf = self.nonlinearity.lipschitz();
        if let Some(n) = self.steps.iter().find(|&&n| self.t_final / n as f64 * lf >= 0.5) {
            return bad(format!("tau * L_f >= 1/2 for N = {n}"));
        }
        for w in self.levels.windows(2) {
            if w[1] <= w[0] {
                return bad("levels must be increasing".into());
            }
        }
        if let Some(j) = self.levels.iter().find(|&&j| !(1..=16).contains(&j)) {
            return bad(format!("level {j} outside 1..=16"));
        }
        if self.ref_factor < 16 || !self.ref_factor.is_power_of_two() {
            return bad(format!(
                "ref_factor {} must be a power of two >= 16",
                self.ref_factor
            ));
        }
        if self.eps_total.iter().any(|e| !(*e > 0.0)) || !(self.eps_balanced > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.eta_rule > 0.0 && self.eta_rule < 1.0) {
            return bad(format!("eta_rule = {} outside (0, 1)", self.eta_rule));
        }
        if !self.space_coupling.is_power_of_two() {
            return bad("space_coupling must be a power of two".into());
        }
        match self.study {
            StudyKind::Space => {
                if let Some(j) = self
                    .levels
                    .iter()
                    .find(|&&j| (1usize << (2 * j)) < self.space_coupling)
                {
                    return bad(format!("level {j} gives fewer than one step"));
                }
            }
            StudyKind::Tolerance | StudyKind::Full | StudyKind::SolveContract => {
                if let Some(j) = self.levels.iter().find(|&&j| !(3..=12).contains(&j)) {
                    return bad(format!("adaptive solver needs levels in 3..=12, got {j}"));
                }
            }
            StudyKind::Hoelder if self.lags.len() < 3 => {
                return bad("need at least three lags".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Slope target of the study's main fit, if it has one.
    pub fn slope_target(&self) -> Option<f64> {
        match self.study {
            StudyKind::Time | StudyKind::Hoelder | StudyKind::Full => Some(self.beta / 2.0),
            StudyKind::Space => Some(self.beta.min(f64::from(ORDER))),
            StudyKind::BasisCheck => Some(f64::from(ORDER)),
            _ => None,
        }
    }

    /// Canonical `key = value` listing followed by the targets.
    pub fn echo(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "study = {}", self.study.name());
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "amplitude = {}", self.amplitude);
        let _ = writeln!(s, "k_modes = {}", self.k_modes);
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "nonlinearity = {}", self.nonlinearity.name());
        let _ = writeln!(s, "initial = {}", self.initial.name());
        let _ = writeln!(
            s,
            "levels = {}",
            join(self.levels.iter().map(|v| v.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "steps = {}",
            join(self.steps.iter().map(|v| v.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "eps_total = {}",
            join(self.eps_total.iter().map(|v| format!("{v:e}")).collect())
        );
        let _ = writeln!(s, "eps_balanced = {:e}", self.eps_balanced);
        let _ = writeln!(s, "eta_rule = {}", self.eta_rule);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "ref_factor = {}", self.ref_factor);
        let _ = writeln!(
            s,
            "lags = {}",
            join(self.lags.iter().map(|v| v.to_string()).collect())
        );
        let _ = writeln!(s, "space_coupling = {}", self.space_coupling);
        let _ = writeln!(s, "problems = {}", self.problems);
        let _ = writeln!(s, "slope_tol = {}", self.slope_tol);
        s
    }

    /// Hex SHA-256 of [`StudyConfig::echo`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.echo().as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_defaults() {
        let c = StudyConfig::parse(
            "study = time\nbeta = 0.5 # rough\nsamples=4\nsteps = 8,16,32\n",
            None,
        )
        .unwrap();
        assert_eq!(c.study, StudyKind::Time);
        assert_eq!(c.rho, 0.1);
        assert_eq!(c.samples, 4);
        assert_eq!(c.steps, vec![8, 16, 32]);
        assert_eq!(c.k_modes, 512);
    }

    #[test]
    fn echo_round_trips() {
        for kind in StudyKind::ALL {
            let c = StudyConfig::defaults(kind);
            c.validate().unwrap();
            let back = StudyConfig::parse(&c.echo(), None).unwrap();
            assert_eq!(back, c, "{}", kind.name());
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StudyConfig::parse("study = time\nsteps = 1,2\n", None).is_err());
        assert!(StudyConfig::parse("study = time\nsteps = 8,12\n", None).is_err());
        assert!(StudyConfig::parse("study = time\nfoo = 1\n", None).is_err());
        assert!(StudyConfig::parse("beta = 1\n", None).is_err());
        assert!(StudyConfig::parse("study = time\nbeta = 1\nrho = 0.5\n", None).is_err());
        assert!(StudyConfig::parse("study = tol\nlevels = 2\n", None).is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = StudyConfig::defaults(StudyKind::Time);
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn parabola_coefficients() {
        let f = InitialValue::Parabola.spectral(64);
        let g = SpectralField::from_fn(64, 512, |x| InitialValue::Parabola.eval(x));
        assert!(f.sub(&g).l2_norm() < 1e-10);
    }
}
