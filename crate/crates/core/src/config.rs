//! Run configuration: JSON parsing with unknown keys rejected, dotted-key
//! overrides, and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::closure::{PhysicalParams, Polynomial};
use crate::error::{config, ChainError, Result};
use crate::grid::AxisSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    State,
    Evolve,
    Check,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// Harmonic-oscillator Wigner function of level `n`.
    Wigner,
    /// Normalized Gaussian with `center` and `sigma` per phase-space axis.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    #[serde(default)]
    pub n: u32,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
    #[serde(default = "unit")]
    pub omega: f64,
    /// Potential polynomial coefficients, lowest power first; harmonic when absent.
    #[serde(default)]
    pub potential: Option<Vec<f64>>,
}

fn unit() -> f64 {
    1.0
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            omega: 1.0,
            potential: None,
        }
    }
}

impl ParamsSpec {
    pub fn build(&self) -> Result<PhysicalParams> {
        match &self.potential {
            None => PhysicalParams::harmonic(self.mass, self.hbar, self.omega),
            Some(c) => PhysicalParams::new(self.mass, self.hbar, Polynomial::new(c.clone()), self.omega),
        }
    }
}

/// Either explicit axes or a square oscillator box of `points` per axis
/// spanning `±widths` state widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub axes: Option<Vec<AxisSpec>>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub widths: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            axes: None,
            points: Some(256),
            widths: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureKindSpec {
    Moyal,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureSpec {
    pub kind: ClosureKindSpec,
    #[serde(default = "default_k_max")]
    pub k_max: i32,
}

fn default_k_max() -> i32 {
    4
}

impl Default for ClosureSpec {
    fn default() -> Self {
        Self {
            kind: ClosureKindSpec::Moyal,
            k_max: default_k_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual max-norm above which a check row is flagged.
    #[serde(default = "default_residual_tol")]
    pub residual: f64,
    #[serde(default = "default_drift_tol")]
    pub f0_minus_drift: f64,
}

fn default_residual_tol() -> f64 {
    1e-2
}

fn default_drift_tol() -> f64 {
    2e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: default_residual_tol(),
            f0_minus_drift: default_drift_tol(),
        }
    }
}

/// Checks a run can evaluate on its rank-2 phase-space field.
pub const CHECK_IDS: [&str; 5] = [
    "momentum-first",
    "energy-first",
    "divergence-identity-0",
    "h-theorem",
    "quantum-pressure",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub state: StateSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub closure: ClosureSpec,
    /// Time step; required by every scenario except `state`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Run length in oscillator periods, rounded to whole steps.
    #[serde(default)]
    pub periods: Option<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_stride() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let params = self.params.build()?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return config("dt must be positive");
            }
        }
        if self.scenario != Scenario::State {
            if self.dt.is_none() {
                return config(format!("scenario {:?} needs dt", self.scenario).to_lowercase());
            }
            match (self.steps, self.periods) {
                (Some(_), Some(_)) => return config("give either steps or periods, not both"),
                (None, None) => return config("steps or periods is required"),
                (_, Some(p)) if !(p > 0.0) => return config("periods must be positive"),
                _ => {}
            }
        }
        if self.snapshot_stride == 0 {
            return config("snapshot_stride must be at least 1");
        }
        for c in &self.checks {
            if !CHECK_IDS.contains(&c.as_str()) {
                return config(format!(
                    "unknown equation id \"{c}\" (available: {})",
                    CHECK_IDS.join(", ")
                ));
            }
        }
        if self.closure.kind == ClosureKindSpec::Moyal && params.hbar > 0.0 && self.closure.k_max < 0 {
            return config("closure.k_max must be non-negative");
        }
        match self.state.kind {
            StateKind::Wigner if params.hbar <= 0.0 => return config("wigner states need hbar > 0"),
            StateKind::Gaussian if self.state.center.is_none() || self.state.sigma.is_none() => {
                return config("gaussian state needs center and sigma")
            }
            _ => {}
        }
        if self.grid.axes.is_none() && self.grid.points.is_none() {
            return config("grid needs axes or points");
        }
        Ok(())
    }

    /// Number of steps, from `steps` or `periods`.
    pub fn step_count(&self) -> Result<usize> {
        match (self.steps, self.periods, self.dt) {
            (Some(s), _, _) => Ok(s),
            (None, Some(p), Some(dt)) => {
                let params = self.params.build()?;
                Ok((p * params.period() / dt).round() as usize)
            }
            _ => Ok(0),
        }
    }
}

/// Parses and validates a config, applying `KEY=VALUE` overrides first.
/// Keys are dotted paths; values are JSON, falling back to plain strings.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| ChainError::Config(format!("syntax: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| ChainError::Config(format!("schema: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ChainError::Config(format!("override \"{spec}\" is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ChainError::Config(format!("override key {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
