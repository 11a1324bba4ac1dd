//! Surface-proximity virtual fixture.
//!
//! Each anatomy contributes a repulsive force along its SDF gradient whose
//! magnitude is the hand-force magnitude while inside `tau0`, decays
//! exponentially between `tau0` and `tauf`, and vanishes beyond `tauf`. The
//! summed force is then clamped so that the commanded force never reverses
//! the component of the hand force that points along it.

use crate::field::SdfVolume;
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Activation thresholds for one anatomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceLawParams {
    /// Clearance (mm) below which motion toward the anatomy is fully blocked.
    #[serde(rename = "tau0_mm")]
    pub tau0: f64,
    /// Clearance (mm) where guidance starts.
    #[serde(rename = "tauf_mm")]
    pub tauf: f64,
    /// Decay rate (1/mm) between the two thresholds.
    #[serde(rename = "lambda_per_mm")]
    pub lambda: f64,
}

impl ForceLawParams {
    /// Dental-stone phantom settings.
    pub const DENTAL_STONE: Self = Self { tau0: 1.0, tauf: 4.0, lambda: 1.0 };
    /// Cadaveric temporal-bone settings.
    pub const TEMPORAL_BONE: Self = Self { tau0: 0.5, tauf: 4.0, lambda: 2.0 };

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau0 >= 0.0 && self.tau0.is_finite()) {
            return Err(format!("tau0_mm = {} must be >= 0", self.tau0));
        }
        if !(self.tauf > self.tau0 && self.tauf.is_finite()) {
            return Err(format!("tauf_mm = {} must exceed tau0_mm = {}", self.tauf, self.tau0));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda_per_mm = {} must be positive", self.lambda));
        }
        Ok(())
    }

    /// Force magnitude as a fraction of `f_max` at clearance `d`.
    pub fn gain(&self, d: f64) -> f64 {
        if d < self.tau0 {
            1.0
        } else if d < self.tauf {
            (self.lambda * (self.tau0 - d)).exp()
        } else {
            0.0
        }
    }
}

impl Default for ForceLawParams {
    fn default() -> Self {
        Self::DENTAL_STONE
    }
}

#[derive(Debug, Clone)]
pub struct AnatomyConstraint {
    pub label: u16,
    pub sdf: SdfVolume,
    pub params: ForceLawParams,
}

impl AnatomyConstraint {
    pub fn new(sdf: SdfVolume, params: ForceLawParams) -> Result<Self, String> {
        params.validate()?;
        Ok(Self { label: sdf.label, sdf, params })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnatomyForce {
    pub label: u16,
    /// Clearance used by the force law (mm).
    pub distance: f64,
    pub force: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceState {
    pub hand_force: Vec3,
    pub sdf_force: Vec3,
    pub compliance_force: Vec3,
    pub per_anatomy: Vec<AnatomyForce>,
    pub f_max: f64,
}

/// Single-anatomy force. `away_dir` must be a unit vector when `valid`.
pub fn per_anatomy_force(distance: f64, away_dir: Vec3, valid: bool, f_max: f64, params: &ForceLawParams) -> Vec3 {
    if !valid {
        return [0.0; 3];
    }
    let g = params.gain(distance);
    if g == 0.0 {
        return [0.0; 3];
    }
    scale(away_dir, f_max * g)
}

/// Sums the per-anatomy forces at `tip`, scaled by the hand-force magnitude.
/// `clearance_offset` is subtracted from each sampled distance (burr radius
/// in burr-surface mode, zero otherwise).
pub fn total_sdf_force(
    constraints: &[AnatomyConstraint],
    tip: Vec3,
    hand_force: Vec3,
    clearance_offset: f64,
) -> ForceState {
    let f_max = norm(hand_force);
    let mut sdf_force = [0.0; 3];
    let mut per_anatomy = Vec::with_capacity(constraints.len());
    for c in constraints {
        let q = c.sdf.gradient(tip);
        let distance = q.distance - clearance_offset;
        let force = per_anatomy_force(distance, q.direction, q.valid, f_max, &c.params);
        sdf_force = add(sdf_force, force);
        per_anatomy.push(AnatomyForce { label: c.label, distance, force });
    }
    ForceState { hand_force, sdf_force, compliance_force: [0.0; 3], per_anatomy, f_max }
}

/// Component of `hand_force` along `sdf_force`.
pub fn parallel_component(hand_force: Vec3, sdf_force: Vec3) -> Vec3 {
    let n = norm(sdf_force);
    if n == 0.0 {
        return [0.0; 3];
    }
    let u = scale(sdf_force, 1.0 / n);
    scale(u, dot(hand_force, u))
}

/// Compliance force sent to the admittance controller.
///
/// Uses the SDF force unless adding it would reverse the hand force's
/// parallel component, in which case the parallel component is cancelled.
/// With `literal` the two branches are swapped, which blocks all approach
/// motion inside `tauf`.
pub fn compliance_force(hand_force: Vec3, sdf_force: Vec3, literal: bool) -> Vec3 {
    if norm(sdf_force) == 0.0 {
        return [0.0; 3];
    }
    let par = parallel_component(hand_force, sdf_force);
    let keeps_direction = dot(add(hand_force, sdf_force), par) >= 0.0;
    let use_sdf = if literal { !keeps_direction } else { keeps_direction };
    if use_sdf {
        sdf_force
    } else {
        scale(par, -1.0)
    }
}
