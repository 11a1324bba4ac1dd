//! The closed loop: force sensing, guidance, admittance, integration and
//! voxel removal, one tick at a time.

mod scenario;
mod script;

pub use scenario::{
    ClearanceMode, ConstraintSpec, DrillTool, GravitySpec, Preset, RobotSpec, Scenario, ScenarioError, VolumeSource,
};
pub use script::{ForceScript, ForceSource, Keyframe, OperatorPolicy};

use crate::calib::{compensate, orientation_params};
use crate::field::{signed_distance, FieldError};
use crate::guidance::{compliance_force, norm, total_sdf_force, AnatomyConstraint, Vec3};
use crate::robot::{solve_admittance, RobotModel};
use crate::transform::RigidTransform;
use crate::volume::{load_label_volume, make_phantom, LabelVolume, SegmentTable, VolumeError, BACKGROUND};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("distance field for constraint label {label}: {source}")]
    Field { label: u16, source: FieldError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub label: u16,
    /// Clearance fed to the force law (burr surface or tip point), mm.
    pub d: f64,
    /// Inside the fully constrained zone: `d < τ0`.
    pub breach: bool,
}

/// One control tick, recorded at the state the tick started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub tip: Vec3,
    pub dist: Vec<Clearance>,
    pub f_h: Vec3,
    pub f_sdf: Vec3,
    pub f_c: Vec3,
    pub vf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnatomyMetrics {
    pub label: u16,
    #[serde(default)]
    pub name: String,
    pub damage_volume_mm3: f64,
    pub min_clearance_mm: f64,
    /// Ticks with clearance below τ0.
    pub breach_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub duration_s: f64,
    pub ticks: u64,
    pub vf_enabled: bool,
    pub drilled_volume_mm3: f64,
    pub anatomies: Vec<AnatomyMetrics>,
    pub initial_matrix_voxels: usize,
    pub remaining_matrix_voxels: usize,
    /// Removed voxel counts by label.
    pub removed_voxels: BTreeMap<u16, usize>,
}

impl Metrics {
    pub fn total_damage_mm3(&self) -> f64 {
        self.anatomies.iter().map(|a| a.damage_volume_mm3).sum()
    }

    pub fn min_clearance_mm(&self) -> f64 {
        self.anatomies.iter().map(|a| a.min_clearance_mm).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelVolumeMm3 {
    pub label: u16,
    pub mm3: f64,
}

/// Read-only view of the current state, published to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub tick: u64,
    pub q: Vec<f64>,
    pub tip: Vec3,
    pub clearance: Vec<Clearance>,
    pub f_h: Vec3,
    pub f_sdf: Vec3,
    pub f_c: Vec3,
    pub vf_enabled: bool,
    pub drill_powered: bool,
    pub drilled_volume: f64,
    pub damage_volume: Vec<LabelVolumeMm3>,
    pub breach: bool,
}

/// Sets every voxel whose center lies within `radius` of `tip` (closed
/// ball) to background. Returns removed counts by former label.
pub fn drill_removal(volume: &mut LabelVolume, tip: Vec3, radius: f64) -> BTreeMap<u16, usize> {
    let mut removed = BTreeMap::new();
    if !(radius >= 0.0) {
        return removed;
    }
    let g = volume.grid;
    let mut range = [(0usize, 0usize); 3];
    for a in 0..3 {
        let lo = ((tip[a] - radius - g.origin[a]) / g.spacing[a]).ceil();
        let hi = ((tip[a] + radius - g.origin[a]) / g.spacing[a]).floor();
        let hi = hi.min(g.dims[a] as f64 - 1.0);
        let lo = lo.max(0.0);
        if !(lo <= hi) {
            return removed;
        }
        range[a] = (lo as usize, hi as usize);
    }
    let r2 = radius * radius;
    for k in range[2].0..=range[2].1 {
        for j in range[1].0..=range[1].1 {
            for i in range[0].0..=range[0].1 {
                let c = g.center(i, j, k);
                let d2 = (c[0] - tip[0]).powi(2) + (c[1] - tip[1]).powi(2) + (c[2] - tip[2]).powi(2);
                if d2 <= r2 {
                    let idx = g.index(i, j, k);
                    let l = volume.labels[idx];
                    if l != BACKGROUND {
                        *removed.entry(l).or_insert(0) += 1;
                        volume.labels[idx] = BACKGROUND;
                    }
                }
            }
        }
    }
    removed
}

/// Loads or rasterizes the scenario's volume.
pub fn load_volume(source: &VolumeSource) -> Result<(LabelVolume, SegmentTable), VolumeError> {
    match source {
        VolumeSource::Phantom(spec) => make_phantom(spec),
        VolumeSource::Path(p) => load_label_volume(p),
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: RobotModel,
    pub tool: DrillTool,
    pub registration: RigidTransform,
    pub matrix_label: u16,
    pub gravity: GravitySpec,
    pub dt: f64,
    pub vf_enabled: bool,
    pub drill_powered: bool,
    pub eq3_literal: bool,
    /// Keep every tick record in `trace`.
    pub record_trace: bool,
    /// Segment names and colors from the volume source, if any.
    pub segments: SegmentTable,
    constraints: Vec<AnatomyConstraint>,
    names: Vec<String>,
    q0: Vec<f64>,
    q: Vec<f64>,
    initial_volume: LabelVolume,
    volume: LabelVolume,
    initial_matrix_voxels: usize,
    tick: u64,
    removed: BTreeMap<u16, usize>,
    min_clearance: Vec<f64>,
    breach_ticks: Vec<u64>,
    last: Option<TraceRecord>,
    trace: Vec<TraceRecord>,
}

impl Simulation {
    /// Builds the volume and one distance field per constraint.
    pub fn from_scenario(s: &Scenario) -> Result<Self, SimError> {
        s.validate()?;
        let (volume, segments) = load_volume(&s.volume)?;
        for (n, c) in s.constraints.iter().enumerate() {
            if !volume.contains_label(c.label) {
                return Err(ScenarioError::Invalid {
                    path: format!("constraints[{n}].label"),
                    msg: format!("label {} is absent from the volume", c.label),
                }
                .into());
            }
        }
        if !volume.contains_label(s.matrix_label) {
            log::warn!("matrix label {} is absent from the volume", s.matrix_label);
        }
        let sdfs: Vec<_> = s
            .constraints
            .par_iter()
            .map(|c| signed_distance(&volume, c.label).map_err(|source| SimError::Field { label: c.label, source }))
            .collect::<Result<_, _>>()?;
        let constraints = sdfs
            .into_iter()
            .zip(&s.constraints)
            .map(|(sdf, c)| AnatomyConstraint::new(sdf, c.resolved_params()).expect("validated params"))
            .collect();
        let names = s
            .constraints
            .iter()
            .map(|c| {
                c.name
                    .clone()
                    .or_else(|| segments.by_label(c.label).map(|seg| seg.name.clone()))
                    .unwrap_or_default()
            })
            .collect();
        let mut sim = Self::new(
            s.robot.model(),
            s.q0.clone(),
            s.tool,
            s.registration,
            constraints,
            volume,
            s.matrix_label,
            s.dt_s,
        );
        sim.names = names;
        sim.segments = segments;
        sim.gravity = s.gravity.clone();
        sim.vf_enabled = s.vf_enabled;
        sim.drill_powered = s.drill_powered;
        sim.eq3_literal = s.eq3_literal;
        Ok(sim)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: RobotModel,
        q0: Vec<f64>,
        tool: DrillTool,
        registration: RigidTransform,
        constraints: Vec<AnatomyConstraint>,
        volume: LabelVolume,
        matrix_label: u16,
        dt: f64,
    ) -> Self {
        let n = constraints.len();
        Self {
            model,
            tool,
            registration,
            matrix_label,
            gravity: GravitySpec::default(),
            dt,
            vf_enabled: true,
            drill_powered: true,
            eq3_literal: false,
            record_trace: true,
            segments: SegmentTable::default(),
            names: vec![String::new(); n],
            constraints,
            q: q0.clone(),
            q0,
            initial_matrix_voxels: volume.count(matrix_label),
            initial_volume: volume.clone(),
            volume,
            tick: 0,
            removed: BTreeMap::new(),
            min_clearance: vec![f64::INFINITY; n],
            breach_ticks: vec![0; n],
            last: None,
            trace: Vec::new(),
        }
    }

    /// Back to the initial joint state and an undrilled volume. Settings
    /// (VF, drill power) are kept.
    pub fn reset(&mut self) {
        self.q = self.q0.clone();
        self.volume = self.initial_volume.clone();
        self.tick = 0;
        self.removed.clear();
        self.min_clearance.fill(f64::INFINITY);
        self.breach_ticks.fill(0);
        self.last = None;
        self.trace.clear();
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn volume(&self) -> &LabelVolume {
        &self.volume
    }

    pub fn constraints(&self) -> &[AnatomyConstraint] {
        &self.constraints
    }

    /// Display name per constraint, in constraint order.
    pub fn constraint_names(&self) -> &[String] {
        &self.names
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    /// Drill tip in the anatomy frame.
    pub fn tip(&self) -> Vec3 {
        let ee = self.model.forward_kinematics(&self.q);
        self.registration.compose(&ee).apply(self.tool.tip_offset_mm)
    }

    pub fn clearances_at(&self, tip: Vec3) -> Vec<Clearance> {
        let off = self.tool.clearance_offset();
        self.constraints
            .iter()
            .map(|c| {
                let d = c.sdf.sample_trilinear(tip) - off;
                Clearance { label: c.label, d, breach: d < c.params.tau0 }
            })
            .collect()
    }

    /// Sensor model and gravity compensation: `f` is what the operator
    /// applies, in the anatomy frame; returns the compensated hand force.
    fn sense(&self, f: Vec3) -> Vec3 {
        if self.gravity.sensor_bias.is_none() && self.gravity.model.is_none() {
            return f;
        }
        let ee = self.model.forward_kinematics(&self.q);
        let uv = orientation_params(&ee.rotation);
        let to_base = self.registration.inverse();
        let mut raw = to_base.apply_vector(f);
        if let Some(bias) = &self.gravity.sensor_bias {
            let b = bias.evaluate(uv.0, uv.1);
            raw = std::array::from_fn(|i| raw[i] + b[i]);
        }
        if let Some(model) = &self.gravity.model {
            raw = compensate(model, uv, raw);
        }
        self.registration.apply_vector(raw)
    }

    /// Advances one control period under operator force `f_applied`
    /// (anatomy frame) and returns the tick's record.
    pub fn step(&mut self, f_applied: Vec3) -> TraceRecord {
        let t = self.time();
        let tip = self.tip();
        let f_h = self.sense(f_applied);

        let mut fs = total_sdf_force(&self.constraints, tip, f_h, self.tool.clearance_offset());
        let f_c = if self.vf_enabled { compliance_force(f_h, fs.sdf_force, self.eq3_literal) } else { [0.0; 3] };
        fs.compliance_force = f_c;

        let to_base = self.registration.inverse();
        let fh_base = to_base.apply_vector(f_h);
        let fc_base = to_base.apply_vector(f_c);
        let f: [f64; 3] = std::array::from_fn(|i| if fc_base[i] == 0.0 { fh_base[i] } else { fh_base[i] + fc_base[i] });
        let dq = solve_admittance(&self.model, &self.q, [f[0], f[1], f[2], 0.0, 0.0, 0.0]);

        let q_prev = self.q.clone();
        for (qi, v) in self.q.iter_mut().zip(&dq) {
            *qi += v * self.dt;
        }
        self.model.clamp_to_limits(&mut self.q);

        if self.drill_powered {
            let new_tip = self.tip();
            for (label, n) in drill_removal(&mut self.volume, new_tip, self.tool.burr_radius_mm) {
                *self.removed.entry(label).or_insert(0) += n;
            }
        }

        let dist: Vec<Clearance> = fs
            .per_anatomy
            .iter()
            .zip(&self.constraints)
            .map(|(a, c)| Clearance { label: a.label, d: a.distance, breach: a.distance < c.params.tau0 })
            .collect();
        for (n, c) in dist.iter().enumerate() {
            self.min_clearance[n] = self.min_clearance[n].min(c.d);
            if c.breach {
                self.breach_ticks[n] += 1;
            }
        }
        let rec = TraceRecord { t, q: q_prev, tip, dist, f_h, f_sdf: fs.sdf_force, f_c, vf: self.vf_enabled };
        self.tick += 1;
        if self.record_trace {
            self.trace.push(rec.clone());
        }
        self.last = Some(rec.clone());
        rec
    }

    fn removed_mm3(&self, label: u16) -> f64 {
        self.removed.get(&label).copied().unwrap_or(0) as f64 * self.volume.grid.voxel_volume()
    }

    pub fn snapshot(&self) -> Snapshot {
        let tip = self.tip();
        let clearance = self.clearances_at(tip);
        let breach = clearance.iter().any(|c| c.breach);
        let (f_h, f_sdf, f_c) = match &self.last {
            Some(r) => (r.f_h, r.f_sdf, r.f_c),
            None => ([0.0; 3], [0.0; 3], [0.0; 3]),
        };
        Snapshot {
            time: self.time(),
            tick: self.tick,
            q: self.q.clone(),
            tip,
            clearance,
            f_h,
            f_sdf,
            f_c,
            vf_enabled: self.vf_enabled,
            drill_powered: self.drill_powered,
            drilled_volume: self.removed_mm3(self.matrix_label),
            damage_volume: self
                .constraints
                .iter()
                .map(|c| LabelVolumeMm3 { label: c.label, mm3: self.removed_mm3(c.label) })
                .collect(),
            breach,
        }
    }

    /// Minimum clearances cover every recorded tick; before the first tick
    /// they are the clearances at the start pose.
    pub fn metrics(&self) -> Metrics {
        let start = if self.tick == 0 { Some(self.clearances_at(self.tip())) } else { None };
        Metrics {
            duration_s: self.time(),
            ticks: self.tick,
            vf_enabled: self.vf_enabled,
            drilled_volume_mm3: self.removed_mm3(self.matrix_label),
            anatomies: self
                .constraints
                .iter()
                .enumerate()
                .map(|(n, c)| AnatomyMetrics {
                    label: c.label,
                    name: self.names[n].clone(),
                    damage_volume_mm3: self.removed_mm3(c.label),
                    min_clearance_mm: start.as_ref().map_or(self.min_clearance[n], |c| c[n].d),
                    breach_ticks: self.breach_ticks[n],
                })
                .collect(),
            initial_matrix_voxels: self.initial_matrix_voxels,
            remaining_matrix_voxels: self.volume.count(self.matrix_label),
            removed_voxels: self.removed.clone(),
        }
    }
}

/// Largest tip displacement one tick can produce for hand forces up to
/// `f_bar`: the clamp at most doubles the commanded force.
pub fn one_tick_overshoot(model: &RobotModel, f_bar: f64, dt: f64) -> f64 {
    let g = model.gains[..3].iter().copied().fold(0.0, f64::max);
    g * 2.0 * f_bar * dt
}

/// Runs a scenario's force script for its full duration.
pub fn run_trajectory(scenario: &Scenario) -> Result<(Vec<TraceRecord>, Metrics), SimError> {
    let mut sim = Simulation::from_scenario(scenario)?;
    let mut source = ForceSource::new(&scenario.force_script, scenario.seed);
    for _ in 0..scenario.ticks() {
        let f = source.force(sim.time(), sim.tip());
        sim.step(f);
    }
    let metrics = sim.metrics();
    Ok((sim.take_trace(), metrics))
}

/// Largest ‖F_H‖ in a trace.
pub fn peak_hand_force(trace: &[TraceRecord]) -> f64 {
    trace.iter().map(|r| norm(r.f_h)).fold(0.0, f64::max)
}
