//! JSON messages exchanged over the steering websocket. Field names are the
//! contract with the browser client; every message carries a `type` tag.

use crate::sim::{ClearanceMode, Scenario, Simulation, Snapshot};
use crate::volume::Segment;
use base64::Engine;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Operator force in the anatomy frame (N). In lockstep mode `ticks`
    /// (default 1) control periods run under this force before the reply.
    HandForce {
        f: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ticks: Option<u64>,
    },
    ToggleVf {
        on: bool,
    },
    SetDrillPower {
        on: bool,
    },
    Reset,
    LoadScenario {
        scenario: Box<Scenario>,
    },
    /// Static scene metadata.
    Scene,
    /// The current (partly drilled) label volume.
    Volume,
    /// The current state, on demand.
    Snapshot,
}

impl ClientMessage {
    /// Commands that change the session; observers may not send them.
    pub fn is_control(&self) -> bool {
        !matches!(self, ClientMessage::Scene | ClientMessage::Volume | ClientMessage::Snapshot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Steering,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnatomyInfo {
    pub label: u16,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[f64; 3]>,
    pub tau0_mm: f64,
    pub tauf_mm: f64,
    pub lambda_per_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub name: String,
    /// The receiving client's role.
    pub role: Role,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dt_s: f64,
    pub matrix_label: u16,
    pub burr_radius_mm: f64,
    pub clearance_mode: ClearanceMode,
    pub anatomies: Vec<AnatomyInfo>,
    pub segments: Vec<Segment>,
}

impl SceneInfo {
    pub fn of(sim: &Simulation, name: &str, role: Role) -> Self {
        let g = sim.volume().grid;
        let anatomies = sim
            .constraints()
            .iter()
            .zip(sim.constraint_names())
            .map(|(c, n)| {
                let seg = sim.segments.by_label(c.label);
                AnatomyInfo {
                    label: c.label,
                    name: if n.is_empty() { seg.map(|s| s.name.clone()).unwrap_or_default() } else { n.clone() },
                    color: seg.and_then(|s| s.color),
                    tau0_mm: c.params.tau0,
                    tauf_mm: c.params.tauf,
                    lambda_per_mm: c.params.lambda,
                }
            })
            .collect();
        Self {
            name: name.to_string(),
            role,
            dims: g.dims,
            spacing_mm: g.spacing,
            origin_mm: g.origin,
            dt_s: sim.dt,
            matrix_label: sim.matrix_label,
            burr_radius_mm: sim.tool.burr_radius_mm,
            clearance_mode: sim.tool.clearance_mode,
            anatomies,
            segments: sim.segments.entries.clone(),
        }
    }
}

/// Labels as base64 of little-endian u16, x fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMessage {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub encoding: String,
    pub data: String,
}

pub const VOLUME_ENCODING: &str = "u16le-base64";

impl VolumeMessage {
    pub fn of(sim: &Simulation) -> Self {
        let v = sim.volume();
        let bytes: Vec<u8> = v.labels.iter().flat_map(|l| l.to_le_bytes()).collect();
        Self {
            dims: v.grid.dims,
            spacing_mm: v.grid.spacing,
            origin_mm: v.grid.origin,
            encoding: VOLUME_ENCODING.into(),
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    pub fn labels(&self) -> Result<Vec<u16>, String> {
        let bytes = base64::engine::general_purpose::STANDARD.decode(&self.data).map_err(|e| e.to_string())?;
        if bytes.len() % 2 != 0 {
            return Err("odd byte count".into());
        }
        Ok(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Scene(SceneInfo),
    Volume(VolumeMessage),
    Error { msg: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable message")
    }
}
