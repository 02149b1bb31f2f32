//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sigmafloor_core::ensembles::EnsembleSpec;

use crate::CliError;

/// Operations accepted by `run`.
pub const OPERATIONS: &[&str] = &[
    "sigma_tail_curve",
    "bkappa_deviation_curve",
    "projection_moment_ratio",
    "distance_smallball_curve",
    "spread_infimum_proxy",
    "check_assumptions",
    "bkappa",
];

/// An ensemble given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SpecSource {
    Path(PathBuf),
    Inline(EnsembleSpec),
}

// Hand-written so that errors inside an inline spec name the offending field.
impl<'de> Deserialize<'de> for SpecSource {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        match v {
            serde_json::Value::String(s) => Ok(SpecSource::Path(PathBuf::from(s))),
            other => EnsembleSpec::deserialize(other).map(SpecSource::Inline).map_err(serde::de::Error::custom),
        }
    }
}

impl SpecSource {
    /// Resolves relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<EnsembleSpec, CliError> {
        let spec = match self {
            SpecSource::Inline(s) => s.clone(),
            SpecSource::Path(p) => {
                let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("spec file {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("spec file {}: {e}", p.display())))?
            }
        };
        spec.validate().map_err(|e| CliError::Config(format!("spec: {e}")))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecSource>,
    /// Threshold grid: epsilon, kappa or t depending on the operation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Operation-specific settings, checked against the operation's own
    /// strict schema.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub options: serde_json::Value,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if !OPERATIONS.contains(&cfg.operation.as_str()) {
            return Err(CliError::Config(format!(
                "field `operation`: unknown operation `{}` (expected one of {})",
                cfg.operation,
                OPERATIONS.join(", ")
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses `options` into the operation's schema; `null` means defaults.
    pub fn options<T: for<'de> Deserialize<'de> + Default>(&self) -> Result<T, CliError> {
        if self.options.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.options.clone())
            .map_err(|e| CliError::Config(format!("field `options`: {e}")))
    }

    /// Rejects `options` for operations that take none.
    pub fn no_options(&self) -> Result<(), CliError> {
        match &self.options {
            serde_json::Value::Null => Ok(()),
            serde_json::Value::Object(m) if m.is_empty() => Ok(()),
            _ => Err(CliError::Config(format!("field `options`: `{}` takes no options", self.operation))),
        }
    }

    pub fn require_grid(&self) -> Result<&[f64], CliError> {
        self.grid.as_deref().ok_or_else(|| CliError::Config("field `grid` is required".into()))
    }

    pub fn require_trials(&self) -> Result<u64, CliError> {
        self.trials.ok_or_else(|| CliError::Config("field `trials` is required".into()))
    }

    pub fn require_spec(&self, base: &Path) -> Result<EnsembleSpec, CliError> {
        self.spec.as_ref().ok_or_else(|| CliError::Config("field `spec` is required".into()))?.load(base)
    }
}

fn default_two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationOptions {
    #[serde(default = "default_two")]
    pub c_factor: f64,
    #[serde(default = "default_two")]
    pub beta: f64,
}

impl Default for DeviationOptions {
    fn default() -> Self {
        DeviationOptions { c_factor: 2.0, beta: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionOptions {
    pub d: usize,
    #[serde(default = "default_subspace")]
    pub subspace: sigmafloor_core::montecarlo::Subspace,
    #[serde(default = "default_two")]
    pub p: f64,
}

fn default_subspace() -> sigmafloor_core::montecarlo::Subspace {
    sigmafloor_core::montecarlo::Subspace::Random
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { d: 0, subspace: default_subspace(), p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceOptions {
    /// Spec of `M`; defaults to i.i.d. copies of the first entry law of `X`.
    #[serde(default)]
    pub m_spec: Option<SpecSource>,
    #[serde(default)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyOptions {
    /// Zero-based column indices `J`.
    pub columns: Vec<usize>,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_probes() -> usize {
    1000
}

impl Default for ProxyOptions {
    fn default() -> Self {
        ProxyOptions { columns: Vec::new(), probes: default_probes() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BkappaOptions {
    /// Matrix as a list of rows.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Squared column norms, instead of `matrix`.
    #[serde(default)]
    pub y: Option<Vec<f64>>,
    pub kappa: f64,
}
