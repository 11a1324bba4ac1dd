//! Scenario documents: everything a run needs except the code.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "volume": { "phantom": { "dims": [64, 64, 80], "spacing_mm": [0.25, 0.25, 0.25], "primitives": [] } },
//!   "matrix_label": 1,
//!   "constraints": [ { "label": 2, "preset": "dental_stone" } ],
//!   "robot": { "gantry": { "gain": 1.0, "limit_mm": 50.0 } },
//!   "q0": [8.0, 8.0, 19.0],
//!   "tool": { "tip_offset_mm": [0, 0, 0], "burr_radius_mm": 0.75 },
//!   "duration_s": 60.0,
//!   "force_script": { "operator": { "target_mm": [8, 8, 7], "push_n": 5.0, "jitter_n": 0.5 } }
//! }
//! ```
//!
//! Relative `volume.path` entries resolve against the scenario file's
//! directory.

use super::script::ForceScript;
use crate::calib::GravityModel;
use crate::guidance::ForceLawParams;
use crate::robot::RobotModel;
use crate::transform::RigidTransform;
use crate::volume::PhantomSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario JSON, line {line} column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("scenario field `{path}`: {msg}")]
    Invalid { path: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeSource {
    Phantom(PhantomSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    DentalStone,
    TemporalBone,
}

impl Preset {
    pub fn params(self) -> ForceLawParams {
        match self {
            Preset::DentalStone => ForceLawParams::DENTAL_STONE,
            Preset::TemporalBone => ForceLawParams::TEMPORAL_BONE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub label: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Explicit thresholds; override `preset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ForceLawParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

impl ConstraintSpec {
    pub fn resolved_params(&self) -> ForceLawParams {
        self.params.unwrap_or_else(|| self.preset.unwrap_or(Preset::DentalStone).params())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotSpec {
    Gantry { gain: f64, limit_mm: f64 },
    Chain(RobotModel),
}

impl RobotSpec {
    pub fn model(&self) -> RobotModel {
        match self {
            RobotSpec::Gantry { gain, limit_mm } => RobotModel::gantry(*gain, *limit_mm),
            RobotSpec::Chain(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceMode {
    TipPoint,
    #[default]
    BurrSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrillTool {
    /// Tip position in the end-effector frame (mm).
    #[serde(default)]
    pub tip_offset_mm: [f64; 3],
    pub burr_radius_mm: f64,
    #[serde(default)]
    pub clearance_mode: ClearanceMode,
}

impl DrillTool {
    /// Subtracted from the sampled distance before the force law.
    pub fn clearance_offset(&self) -> f64 {
        match self.clearance_mode {
            ClearanceMode::TipPoint => 0.0,
            ClearanceMode::BurrSurface => self.burr_radius_mm,
        }
    }
}

/// `sensor_bias` is the bias the simulated force sensor adds; `model` is the
/// compensation applied to its readings. Either may be absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GravitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_bias: Option<GravityModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<GravityModel>,
}

fn default_dt() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub volume: VolumeSource,
    /// Label of the drillable bulk material.
    pub matrix_label: u16,
    pub constraints: Vec<ConstraintSpec>,
    pub robot: RobotSpec,
    pub q0: Vec<f64>,
    /// Robot base frame → anatomy (volume) frame.
    #[serde(default)]
    pub registration: RigidTransform,
    pub tool: DrillTool,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    pub force_script: ForceScript,
    #[serde(default = "yes")]
    pub vf_enabled: bool,
    #[serde(default = "yes")]
    pub drill_powered: bool,
    #[serde(default)]
    pub seed: u64,
    /// Swap the compliance clamp branches (literal printed form).
    #[serde(default)]
    pub eq3_literal: bool,
    #[serde(default)]
    pub gravity: GravitySpec,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    /// Reads and validates a scenario; a relative volume path is rebased
    /// onto the file's directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        let mut s = Self::from_json(&text)?;
        if let VolumeSource::Path(p) = &mut s.volume {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(s)
    }

    pub fn ticks(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.matrix_label == 0 {
            return Err(invalid("matrix_label", "label 0 is background"));
        }
        for (n, c) in self.constraints.iter().enumerate() {
            if c.label == 0 {
                return Err(invalid(format!("constraints[{n}].label"), "label 0 is background"));
            }
            if c.label == self.matrix_label {
                return Err(invalid(format!("constraints[{n}].label"), "an anatomy cannot be the drillable matrix"));
            }
            if self.constraints[..n].iter().any(|o| o.label == c.label) {
                return Err(invalid(format!("constraints[{n}].label"), format!("label {} listed twice", c.label)));
            }
            c.resolved_params().validate().map_err(|m| invalid(format!("constraints[{n}].params"), m))?;
        }
        let model = self.robot.model();
        model.validate().map_err(|m| invalid("robot", m))?;
        if model.gains.iter().any(|&g| !(g > 0.0)) {
            return Err(invalid("robot.gains", "admittance gains must be positive"));
        }
        if !(model.damping > 0.0) {
            return Err(invalid("robot.damping", "damping must be positive"));
        }
        if self.q0.len() != model.dof() {
            return Err(invalid("q0", format!("expected {} joint values, got {}", model.dof(), self.q0.len())));
        }
        for (n, (q, j)) in self.q0.iter().zip(&model.joints).enumerate() {
            if *q < j.limits[0] || *q > j.limits[1] {
                return Err(invalid(format!("q0[{n}]"), format!("{q} outside joint limits {:?}", j.limits)));
            }
        }
        if !self.registration.is_valid(1e-9) {
            return Err(invalid("registration", "rotation is not orthonormal"));
        }
        if !(self.tool.burr_radius_mm >= 0.0) {
            return Err(invalid("tool.burr_radius_mm", "must be >= 0"));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(invalid("dt_s", "must be positive"));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be >= 0"));
        }
        self.force_script.validate().map_err(|(p, m)| invalid(format!("force_script.{p}"), m))?;
        for (key, g) in [("gravity.sensor_bias", &self.gravity.sensor_bias), ("gravity.model", &self.gravity.model)] {
            if let Some(g) = g {
                g.validate().map_err(|m| invalid(key, m))?;
            }
        }
        Ok(())
    }
}
