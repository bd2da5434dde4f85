//! Run configuration: one JSON document, optionally overridden from the
//! command line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lindcycle::cycle::{SpectralTolerances, DUAL_METHOD_TOLERANCE, ENTROPY_SLACK};
use lindcycle::models::{self, ModelSpec, ScheduleKind};
use lindcycle::serde_matrix::HermitianRepr;
use lindcycle::{PropagationOptions, SliceRule};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: usize = 257;
pub const DEFAULT_PERIODS: usize = 50;
pub const DEFAULT_POINTS_PER_PERIOD: usize = 16;
pub const SEED_ENV: &str = "LINDCYCLE_SEED";

/// Error in the configuration or the command line; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

/// Which system to analyse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelRef {
    /// One of the shipped models with default parameters.
    Builtin(String),
    DrivenQubit { gamma_down: f64, gamma_up: f64, drive_amplitude: f64, period: f64 },
    Counterexample { gamma_down: f64, gamma_up: f64, step_duration: f64 },
    Repaired { gamma: f64, step_duration: f64, mix_rate: f64 },
    Quasiperiodic { kind: ScheduleKind, horizon: f64 },
    /// A full model description.
    Inline(ModelSpec),
}

impl ModelRef {
    pub fn build(&self) -> Result<ModelSpec> {
        let spec = match self {
            Self::Builtin(name) => models::builtin(name),
            Self::DrivenQubit { gamma_down, gamma_up, drive_amplitude, period } => {
                models::build_driven_qubit(*gamma_down, *gamma_up, *drive_amplitude, *period)
            }
            Self::Counterexample { gamma_down, gamma_up, step_duration } => {
                models::build_counterexample_rates(*gamma_down, *gamma_up, *step_duration)
            }
            Self::Repaired { gamma, step_duration, mix_rate } => {
                models::build_repaired_counterexample(*gamma, *step_duration, *mix_rate)
            }
            Self::Quasiperiodic { kind, horizon } => models::build_quasiperiodic_qubit(*kind, *horizon),
            Self::Inline(spec) => return Ok(spec.clone()),
        };
        spec.map_err(|e| usage(format!("model: {e}")))
    }
}

/// Initial state for `evolve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    MaximallyMixed,
    /// Drawn from the run seed.
    Random,
    BasisState(usize),
    Matrix(HermitianRepr),
    /// The reference cycle's state at `t = 0`.
    Anchor,
}

/// Thresholds that decide verdicts. Every command reports all of them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unit_eigenvalue: f64,
    pub peripheral: f64,
    pub periodicity_residual: f64,
    pub dual_method: f64,
    pub distance_threshold: f64,
    pub monotone_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let spectral = SpectralTolerances::default();
        Self {
            unit_eigenvalue: spectral.unit,
            peripheral: spectral.peripheral,
            periodicity_residual: 1e-8,
            dual_method: DUAL_METHOD_TOLERANCE,
            distance_threshold: 1e-6,
            monotone_slack: ENTROPY_SLACK,
        }
    }
}

impl Tolerances {
    pub const KEYS: &'static [&'static str] =
        &["unit_eigenvalue", "peripheral", "periodicity_residual", "dual_method", "distance_threshold", "monotone_slack"];

    pub fn spectral(&self) -> SpectralTolerances {
        SpectralTolerances { unit: self.unit_eigenvalue, peripheral: self.peripheral }
    }

    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("unit_eigenvalue", self.unit_eigenvalue),
            ("peripheral", self.peripheral),
            ("periodicity_residual", self.periodicity_residual),
            ("dual_method", self.dual_method),
            ("distance_threshold", self.distance_threshold),
            ("monotone_slack", self.monotone_slack),
        ]
    }

    /// Applies one `KEY=VALUE` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| usage(format!("--tolerance expects KEY=VALUE, got '{assignment}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--tolerance {key}: '{value}' is not a number")))?;
        if !(value >= 0.0) || !value.is_finite() {
            return Err(usage(format!("--tolerance {key}: must be a finite non-negative number")));
        }
        let slot = match key.trim() {
            "unit_eigenvalue" => &mut self.unit_eigenvalue,
            "peripheral" => &mut self.peripheral,
            "periodicity_residual" => &mut self.periodicity_residual,
            "dual_method" => &mut self.dual_method,
            "distance_threshold" => &mut self.distance_threshold,
            "monotone_slack" => &mut self.monotone_slack,
            other => {
                return Err(usage(format!(
                    "--tolerance: unknown key '{other}'; expected one of {}",
                    Self::KEYS.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

/// The JSON document accepted by `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelRef>,
    /// Rate grid points (per segment for `check`, over the window for `rates`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices_per_unit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_rule: Option<SliceRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<StateSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a config document, reporting the JSON path and line of any error.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            usage(format!("config error at '{path}' (line {}, column {}): {inner}", inner.line(), inner.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| usage(format!("{e:#}")))?;
        Self::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub samples: Option<usize>,
    pub slices: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerances: Vec<String>,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub model: ModelSpec,
    pub samples: usize,
    pub propagation: PropagationOptions,
    pub horizon: Option<f64>,
    pub seed: u64,
    pub periods: usize,
    pub points_per_period: usize,
    pub rho0: StateSpec,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl Settings {
    /// Precedence: command line, then config file, then `LINDCYCLE_SEED`
    /// (seed only), then defaults.
    pub fn resolve(config: RunConfig, cli: Overrides) -> Result<Self> {
        let model_ref = match (cli.model, config.model) {
            (Some(name), _) => ModelRef::Builtin(name),
            (None, Some(m)) => m,
            (None, None) => bail!(UsageError("no model: pass --model NAME or set \"model\" in the config".into())),
        };
        let model = model_ref.build()?;
        let samples = cli.samples.or(config.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples < 2 {
            bail!(UsageError(format!("samples must be at least 2, got {samples}")));
        }
        let slices = cli.slices.or(config.slices_per_unit).unwrap_or(lindcycle::propagation::DEFAULT_SLICES_PER_UNIT);
        if slices == 0 {
            bail!(UsageError("slices per unit time must be positive".into()));
        }
        let horizon = cli.horizon.or(config.horizon);
        if let Some(h) = horizon {
            if !(h > 0.0) || !h.is_finite() {
                bail!(UsageError(format!("horizon must be positive, got {h}")));
            }
        }
        let seed = match cli.seed.or(config.seed) {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        };
        let periods = config.periods.unwrap_or(DEFAULT_PERIODS);
        let points_per_period = config.points_per_period.unwrap_or(DEFAULT_POINTS_PER_PERIOD);
        if periods == 0 || points_per_period == 0 {
            bail!(UsageError("periods and points_per_period must be positive".into()));
        }
        let mut tolerances = config.tolerances;
        for t in &cli.tolerances {
            tolerances.set(t)?;
        }
        Ok(Self {
            model,
            samples,
            propagation: PropagationOptions { slices_per_unit: slices, rule: config.slice_rule.unwrap_or_default() },
            horizon,
            seed,
            periods,
            points_per_period,
            rho0: config.rho0.unwrap_or(StateSpec::Random),
            tolerances,
            out: cli.out.or(config.out).unwrap_or_else(|| PathBuf::from("lindcycle_out")),
        })
    }

    /// `# key: value` lines recorded at the top of every CSV and report.
    pub fn metadata(&self, command: &str) -> Vec<String> {
        let rule = match self.propagation.rule {
            SliceRule::Midpoint => "midpoint",
            SliceRule::RightEndpoint => "right_endpoint",
        };
        let mut lines = vec![
            format!("command: {command}"),
            format!("model: {}", self.model.name),
            format!("seed: {}", self.seed),
            format!("samples: {}", self.samples),
            format!("slices_per_unit: {}", self.propagation.slices_per_unit),
            format!("slice_rule: {rule}"),
        ];
        if let Some(h) = self.horizon {
            lines.push(format!("horizon: {h}"));
        }
        lines.extend(self.tolerances.entries().iter().map(|(k, v)| format!("tolerance.{k}: {v:e}")));
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_located() {
        let err = RunConfig::parse("{\n  \"model\": {\"builtin\": \"driven_qubit\"},\n  \"slices\": 3\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("slices"), "{msg}");
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn nested_error_path() {
        let err = RunConfig::parse(r#"{"tolerances": {"peripheral": "big"}}"#).unwrap_err().to_string();
        assert!(err.contains("tolerances.peripheral"), "{err}");
    }

    #[test]
    fn precedence() {
        let config = RunConfig::parse(r#"{"model": {"builtin": "pi_pulse"}, "seed": 9, "samples": 33}"#).unwrap();
        let cli = Overrides { samples: Some(65), tolerances: vec!["peripheral=1e-3".into()], ..Default::default() };
        let s = Settings::resolve(config, cli).unwrap();
        assert_eq!(s.model.name, "pi_pulse");
        assert_eq!((s.seed, s.samples), (9, 65));
        assert_eq!(s.tolerances.peripheral, 1e-3);
        assert_eq!(s.tolerances.unit_eigenvalue, 1e-6);
    }

    #[test]
    fn tolerance_override_errors() {
        let mut t = Tolerances::default();
        assert!(t.set("peripheral").is_err());
        assert!(t.set("nope=1").is_err());
        assert!(t.set("peripheral=-1").is_err());
        t.set("distance_threshold=0.5").unwrap();
        assert_eq!(t.distance_threshold, 0.5);
    }

    #[test]
    fn inline_model_round_trips() {
        let spec = models::builtin("counterexample").unwrap();
        let config = RunConfig { model: Some(ModelRef::Inline(spec.clone())), ..Default::default() };
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.model.unwrap().build().unwrap(), spec);
    }
}
