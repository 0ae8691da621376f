//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dgiga::assembly::PenaltyScale;
use dgiga::grading::choose_mu;
use dgiga::solver::{SolverKind, SolverOptions};
use dgiga::BenchmarkCase;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable overriding the output directory of the config file.
pub const OUTPUT_ENV: &str = "DGIGA_OUTPUT_DIR";

/// A number, or a keyword standing for a computed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting<const AUTO: bool> {
    Keyword,
    Value(f64),
}

/// Grading parameter, `auto` picks it from the singular exponent.
pub type MuSetting = Setting<true>;
/// Penalty parameter, `default` uses `4 (k+1) (k+d)`.
pub type PenaltySetting = Setting<false>;

impl<const AUTO: bool> Setting<AUTO> {
    const WORD: &'static str = if AUTO { "auto" } else { "default" };
}

impl<const AUTO: bool> FromStr for Setting<AUTO> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == Self::WORD {
            return Ok(Setting::Keyword);
        }
        s.parse::<f64>().map(Setting::Value).map_err(|_| format!("expected a number or `{}`, got `{s}`", Self::WORD))
    }
}

impl<const AUTO: bool> fmt::Display for Setting<AUTO> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Keyword => f.write_str(Self::WORD),
            Setting::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSetting {
    Number(f64),
    Word(String),
}

impl<const AUTO: bool> Serialize for Setting<AUTO> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Setting::Keyword => RawSetting::Word(Self::WORD.into()),
            Setting::Value(v) => RawSetting::Number(*v),
        }
        .serialize(s)
    }
}

impl<'de, const AUTO: bool> Deserialize<'de> for Setting<AUTO> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawSetting::deserialize(d)? {
            RawSetting::Number(v) => Ok(Setting::Value(v)),
            RawSetting::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Everything a run needs. Absent keys take defaults when resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    /// Multipatch geometry file, used instead of a bundled case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSetting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<PenaltySetting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty_scale: Option<String>,
    /// Highest refinement level `S`; a single solve uses this level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Elements per direction at level 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Samples per direction and patch in field dumps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// `self` with every key set in `over` replaced. Choosing a case drops a
    /// file from the base and vice versa.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        if over.case.is_some() {
            self.file = None;
        }
        if over.file.is_some() {
            self.case = None;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(case, file, k, mu, eta, penalty_scale, levels, n0, solver, tol, output, samples);
        self
    }

    pub fn load_case(&self) -> Result<BenchmarkCase, CliError> {
        match (&self.case, &self.file) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either a case or a file, not both".into())),
            (Some(name), None) => Ok(dgiga::case_by_name(name).map_err(dgiga::Error::from)?),
            (None, Some(path)) => Ok(BenchmarkCase::load(path).map_err(dgiga::Error::from)?),
            (None, None) => Err(CliError::Usage(format!(
                "no case given; use --case <name> or --file <path>, available cases: {}",
                dgiga::problems::CASE_NAMES.join(", ")
            ))),
        }
    }

    /// Validated settings for `case`; `env_output` overrides the configured output directory.
    pub fn resolve(&self, case: &BenchmarkCase, env_output: Option<PathBuf>) -> Result<Resolved, CliError> {
        let k = self.k.unwrap_or(1);
        if !(1..=dgiga::spline::MAX_DEGREE).contains(&k) {
            return Err(CliError::Usage(format!("degree k = {k} must lie in 1..={}", dgiga::spline::MAX_DEGREE)));
        }
        let mu = match self.mu.unwrap_or(Setting::Keyword) {
            Setting::Value(mu) => mu,
            Setting::Keyword => match &case.singularity {
                Some(s) => choose_mu(s.rate_exponent, k, s.delta).map_err(dgiga::Error::from)?,
                None => 1.0,
            },
        };
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(CliError::Usage(format!("mu = {mu} must lie in (0, 1]")));
        }
        let penalty = match self.eta.unwrap_or(Setting::Keyword) {
            Setting::Keyword => None,
            Setting::Value(eta) if eta > 0.0 && eta.is_finite() => Some(eta),
            Setting::Value(eta) => return Err(CliError::Usage(format!("penalty eta = {eta} must be positive"))),
        };
        let penalty_scale = match &self.penalty_scale {
            Some(s) => s.parse::<PenaltyScale>().map_err(CliError::Usage)?,
            None => PenaltyScale::default(),
        };
        let mut solver = SolverOptions::default();
        if let Some(s) = &self.solver {
            solver.kind = s.parse::<SolverKind>().map_err(CliError::Usage)?;
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(CliError::Usage(format!("solver tolerance {tol} must be positive")));
            }
            solver.tol = tol;
        }
        let n0 = self.n0.unwrap_or(2);
        if n0 == 0 {
            return Err(CliError::Usage("n0 must be positive".into()));
        }
        let levels = self.levels.unwrap_or(4);
        if levels > 16 || n0 > 1 << 10 {
            return Err(CliError::Usage(format!("level {levels} with n0 = {n0} is too fine")));
        }
        let output = env_output.or_else(|| self.output.clone()).unwrap_or_else(|| PathBuf::from("dgiga-output"));
        Ok(Resolved {
            k,
            mu,
            penalty,
            penalty_scale,
            levels,
            n0,
            solver,
            output,
            samples: self.samples.unwrap_or(9).max(2),
        })
    }
}

/// Settings after defaults and validation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub k: usize,
    pub mu: f64,
    pub penalty: Option<f64>,
    pub penalty_scale: PenaltyScale,
    pub levels: usize,
    pub n0: usize,
    pub solver: SolverOptions,
    pub output: PathBuf,
    pub samples: usize,
}
