//! Seeded forward generators for the calibration solvers. Every generator
//! returns the ground truth alongside the measurements so callers can check
//! a solver by inverting its own input.

use super::{register_points, GravityModel, GravitySample, MotionPair, RigidTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> [f64; 3] {
    if sigma == 0.0 {
        return [0.0; 3];
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    [n.sample(rng), n.sample(rng), n.sample(rng)]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Uniform random axis, angle uniform in `[lo, hi]` radians.
pub fn random_rotation(rng: &mut ChaCha8Rng, lo: f64, hi: f64, t: [f64; 3]) -> RigidTransform {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    RigidTransform::from_axis_angle(axis, rng.random_range(lo..=hi), t)
}

pub fn random_rigid(rng: &mut ChaCha8Rng, extent_mm: f64) -> RigidTransform {
    let t = [
        rng.random_range(-extent_mm..=extent_mm),
        rng.random_range(-extent_mm..=extent_mm),
        rng.random_range(-extent_mm..=extent_mm),
    ];
    random_rotation(rng, 0.0, std::f64::consts::PI, t)
}

#[derive(Debug, Clone)]
pub struct PivotData {
    pub tip_offset: [f64; 3],
    pub pivot_point: [f64; 3],
    pub poses: Vec<RigidTransform>,
}

/// Marker poses that keep `tip_offset` on `pivot_point`, tilted up to 40°
/// about random axes; `sigma_mm` perturbs each marker position.
pub fn pivot_poses(seed: u64, n: usize, tip_offset: [f64; 3], pivot_point: [f64; 3], sigma_mm: f64) -> PivotData {
    let mut r = rng(seed);
    let poses = (0..n)
        .map(|_| {
            let rot = random_rotation(&mut r, 0.1, 40f64.to_radians(), [0.0; 3]);
            let tip_world = rot.apply_vector(tip_offset);
            let p = [pivot_point[0] - tip_world[0], pivot_point[1] - tip_world[1], pivot_point[2] - tip_world[2]];
            RigidTransform::new(rot.rotation, add3(p, gaussian3(&mut r, sigma_mm)).into())
        })
        .collect();
    PivotData { tip_offset, pivot_point, poses }
}

#[derive(Debug, Clone)]
pub struct HandEyeData {
    /// End-effector → marker.
    pub x: RigidTransform,
    pub pairs: Vec<MotionPair>,
}

/// Marker fiducial layout in the marker frame (mm); four non-coplanar
/// spheres on a ~50 mm tree, in the style of passive optical markers.
pub const MARKER_FIDUCIALS: [[f64; 3]; 4] =
    [[0.0, 0.0, 0.0], [50.0, 0.0, 0.0], [0.0, 40.0, 0.0], [20.0, 15.0, 25.0]];

/// Simulates a tracker observing a marker rigidly mounted on the end
/// effector. Robot poses are exact; each observed fiducial gets isotropic
/// noise `sigma_mm` and the marker pose is re-estimated by point
/// registration, so noise enters the pairs the way it does on a bench.
/// Pairs are built from consecutive stations.
pub fn hand_eye_pairs(seed: u64, n_pairs: usize, sigma_mm: f64) -> HandEyeData {
    let mut r = rng(seed);
    let x = RigidTransform::from_axis_angle([0.3, -0.5, 0.8], 0.7, [35.0, -20.0, 90.0]);
    // base → tracker, camera ~1.5 m from the workspace
    let w = RigidTransform::from_axis_angle([0.0, 1.0, 0.2], 2.5, [200.0, 100.0, 1500.0]);
    let w_inv = w.inverse();

    let mut stations = Vec::with_capacity(n_pairs + 1);
    for _ in 0..=n_pairs {
        let t = [r.random_range(-150.0..=150.0), r.random_range(-150.0..=150.0), r.random_range(300.0..=500.0)];
        let ee = random_rotation(&mut r, 0.0, 50f64.to_radians(), t);
        // tracker ← marker
        let truth = w_inv.compose(&ee).compose(&x);
        let observed: Vec<[f64; 3]> =
            MARKER_FIDUCIALS.iter().map(|&f| add3(truth.apply(f), gaussian3(&mut r, sigma_mm))).collect();
        let marker = register_points(&MARKER_FIDUCIALS, &observed).expect("marker layout is non-degenerate").transform;
        stations.push((ee, marker));
    }
    let pairs = stations
        .windows(2)
        .map(|s| MotionPair {
            a: s[0].0.inverse().compose(&s[1].0),
            b: s[0].1.inverse().compose(&s[1].1),
        })
        .collect();
    HandEyeData { x, pairs }
}

#[derive(Debug, Clone)]
pub struct RegistrationData {
    pub truth: RigidTransform,
    pub p: Vec<[f64; 3]>,
    pub q: Vec<[f64; 3]>,
}

/// Fiducial positions in a 100 mm cube and their images under a random
/// rigid transform, with noise `sigma_mm` on the images.
pub fn registration_set(seed: u64, n: usize, sigma_mm: f64) -> RegistrationData {
    let mut r = rng(seed);
    let truth = random_rigid(&mut r, 200.0);
    let p: Vec<[f64; 3]> = (0..n)
        .map(|_| [r.random_range(-50.0..=50.0), r.random_range(-50.0..=50.0), r.random_range(-50.0..=50.0)])
        .collect();
    let q = p.iter().map(|&v| add3(truth.apply(v), gaussian3(&mut r, sigma_mm))).collect();
    RegistrationData { truth, p, q }
}

/// Random degree-`degree` Bernstein bias surface, coefficients in ±`amp_n`.
pub fn bias_field(seed: u64, degree: usize, amp_n: f64) -> GravityModel {
    let mut r = rng(seed);
    let mut m = GravityModel::zero(degree);
    for axis in m.coefficients.iter_mut() {
        for c in axis.iter_mut() {
            *c = r.random_range(-amp_n..=amp_n);
        }
    }
    m
}

/// Sensor readings `truth(u,v) + noise` at uniformly random orientations.
pub fn gravity_samples(seed: u64, truth: &GravityModel, n: usize, sigma_n: f64) -> Vec<GravitySample> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let uv = [r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)];
            let force = add3(truth.evaluate(uv[0], uv[1]), gaussian3(&mut r, sigma_n));
            GravitySample { uv, force }
        })
        .collect()
}

/// Held-out check for a fitted bias model: at fresh orientations, an
/// operator applies a known hand force, the sensor reads
/// `hand + bias + noise`, and the model's job is to recover `hand`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensationEval {
    /// RMS of ‖F_H − hand‖ after compensation (N).
    pub residual_rms: f64,
    /// RMS of ‖raw − hand‖, i.e. without compensation (N).
    pub uncompensated_rms: f64,
    /// `1 − residual² / uncompensated²`.
    pub energy_reduction: f64,
}

pub fn evaluate_compensation(
    seed: u64,
    truth: &GravityModel,
    fitted: &GravityModel,
    n: usize,
    sigma_n: f64,
) -> CompensationEval {
    let mut r = rng(seed);
    let mut res = Vec::with_capacity(n);
    let mut unc = Vec::with_capacity(n);
    for _ in 0..n {
        let (u, v) = (r.random_range(0.0..=1.0), r.random_range(0.0..=1.0));
        let hand = gaussian3(&mut r, 3.0);
        let raw = add3(add3(hand, truth.evaluate(u, v)), gaussian3(&mut r, sigma_n));
        let fh = super::compensate(fitted, (u, v), raw);
        let d = |a: [f64; 3]| ((a[0] - hand[0]).powi(2) + (a[1] - hand[1]).powi(2) + (a[2] - hand[2]).powi(2)).sqrt();
        res.push(d(fh));
        unc.push(d(raw));
    }
    let residual_rms = super::rms(res.into_iter());
    let uncompensated_rms = super::rms(unc.into_iter());
    CompensationEval {
        residual_rms,
        uncompensated_rms,
        energy_reduction: 1.0 - (residual_rms / uncompensated_rms).powi(2),
    }
}
