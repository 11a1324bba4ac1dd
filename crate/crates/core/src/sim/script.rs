//! Hand-force sources for scripted runs.

use crate::guidance::{add, dot, norm, scale, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t_s: f64,
    pub force_n: Vec3,
}

/// A synthetic operator: pushes toward a target point with constant
/// magnitude `push_n`. Gaussian tangential jitter, resampled every tick,
/// tilts the push direction without changing its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorPolicy {
    /// In the anatomy frame.
    pub target_mm: Vec3,
    pub push_n: f64,
    #[serde(default)]
    pub jitter_n: f64,
    /// Overrides the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Forces are expressed in the anatomy frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceScript {
    /// Linear interpolation between keyframes; the first and last values
    /// hold outside the keyed range. No keyframes means zero force.
    Keyframes(Vec<Keyframe>),
    Operator(OperatorPolicy),
}

impl ForceScript {
    pub(crate) fn validate(&self) -> Result<(), (String, String)> {
        match self {
            ForceScript::Keyframes(k) => {
                for (n, f) in k.iter().enumerate() {
                    if !f.t_s.is_finite() || f.force_n.iter().any(|c| !c.is_finite()) {
                        return Err((format!("keyframes[{n}]"), "non-finite value".into()));
                    }
                    if n > 0 && f.t_s < k[n - 1].t_s {
                        return Err((format!("keyframes[{n}].t_s"), "keyframe times must not decrease".into()));
                    }
                }
            }
            ForceScript::Operator(p) => {
                if !(p.push_n >= 0.0) {
                    return Err(("operator.push_n".into(), "must be >= 0".into()));
                }
                if !(p.jitter_n >= 0.0) {
                    return Err(("operator.jitter_n".into(), "must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Upper bound on ‖F_H‖ over the script.
    pub fn force_bound(&self) -> f64 {
        match self {
            ForceScript::Keyframes(k) => k.iter().map(|f| norm(f.force_n)).fold(0.0, f64::max),
            ForceScript::Operator(p) => p.push_n,
        }
    }
}

/// Stateful evaluator for a [`ForceScript`]. Two sources built from the same
/// script and seed produce identical force sequences for identical queries.
#[derive(Debug, Clone)]
pub struct ForceSource {
    script: ForceScript,
    rng: ChaCha8Rng,
}

impl ForceSource {
    pub fn new(script: &ForceScript, scenario_seed: u64) -> Self {
        let seed = match script {
            ForceScript::Operator(OperatorPolicy { seed: Some(s), .. }) => *s,
            _ => scenario_seed,
        };
        Self { script: script.clone(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Force at time `t` with the tip at `tip` (both anatomy frame).
    pub fn force(&mut self, t: f64, tip: Vec3) -> Vec3 {
        match &self.script {
            ForceScript::Keyframes(k) => interpolate(k, t),
            ForceScript::Operator(p) => {
                let to_target = [p.target_mm[0] - tip[0], p.target_mm[1] - tip[1], p.target_mm[2] - tip[2]];
                let dist = norm(to_target);
                let (dir, push) = if dist > 1e-9 { (scale(to_target, 1.0 / dist), scale(to_target, p.push_n / dist)) } else { ([0.0; 3], [0.0; 3]) };
                if p.jitter_n == 0.0 {
                    return push;
                }
                let n = Normal::new(0.0, p.jitter_n).expect("finite jitter");
                let raw = [n.sample(&mut self.rng), n.sample(&mut self.rng), n.sample(&mut self.rng)];
                let tangential = add(raw, scale(dir, -dot(raw, dir)));
                let f = add(push, tangential);
                let n = norm(f);
                if n > 0.0 {
                    scale(f, p.push_n / n)
                } else {
                    f
                }
            }
        }
    }
}

fn interpolate(keys: &[Keyframe], t: f64) -> Vec3 {
    let (Some(first), Some(last)) = (keys.first(), keys.last()) else {
        return [0.0; 3];
    };
    if t <= first.t_s {
        return first.force_n;
    }
    if t >= last.t_s {
        return last.force_n;
    }
    // last keyframe at or before t; later duplicates win, giving steps
    let i = keys.partition_point(|k| k.t_s <= t) - 1;
    let (a, b) = (keys[i], keys[i + 1]);
    let span = b.t_s - a.t_s;
    if span <= 0.0 {
        return b.force_n;
    }
    let w = (t - a.t_s) / span;
    std::array::from_fn(|c| a.force_n[c] + (b.force_n[c] - a.force_n[c]) * w)
}
