//! Calibration and registration: pivot calibration of the drill tip,
//! AX = XB hand-eye calibration, paired-point rigid registration and a
//! Bernstein-polynomial model of the orientation-dependent force bias.

mod gravity;
mod hand_eye;
mod pivot;
mod register;
pub mod synth;

pub use gravity::{bernstein, compensate, fit_gravity_model, orientation_params, GravityModel, GravitySample};
pub use hand_eye::{hand_eye_calibrate, HandEyeReport, MotionPair};
pub use pivot::{pivot_calibrate, PivotReport};
pub use register::{register_points, RegistrationReport};

pub use crate::transform::RigidTransform;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalibError {
    #[error("not enough samples: {0}")]
    Insufficient(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("size mismatch: {0} vs {1} points")]
    SizeMismatch(usize, usize),
}

/// Singular values below this fraction of the largest count as zero.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Proper rotation `R` maximizing `tr(R·H)` for a cross-covariance
/// `H = Σ p·qᵀ`; flips the weakest singular direction instead of returning a
/// reflection.
pub(crate) fn proper_rotation(h: &nalgebra::Matrix3<f64>) -> nalgebra::Matrix3<f64> {
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut d = nalgebra::Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        let weakest = svd.singular_values.imin();
        d[(weakest, weakest)] = -1.0;
    }
    vt.transpose() * d * u.transpose()
}

pub(crate) fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
