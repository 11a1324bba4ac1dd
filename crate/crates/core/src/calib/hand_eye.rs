use super::{proper_rotation, rms, CalibError, RigidTransform, RANK_TOL};
use crate::transform::{log_rotation, rotation_angle};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// One relative motion pair: `a` in the robot chain (end-effector motion),
/// `b` in the tracker chain (marker motion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionPair {
    pub a: RigidTransform,
    pub b: RigidTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandEyeReport {
    pub transform: RigidTransform,
    pub rot_rmse_deg: f64,
    pub trans_rmse_mm: f64,
    pub sample_count: usize,
}

const MIN_ANGLE: f64 = 1e-9;

/// Solves `A·X = X·B`: rotation from a least-squares alignment of the
/// motion rotation vectors, then translation from the stacked system
/// `(R_A − I)·t_X = R_X·t_B − t_A`.
pub fn hand_eye_calibrate(pairs: &[MotionPair]) -> Result<HandEyeReport, CalibError> {
    if pairs.len() < 2 {
        return Err(CalibError::Degenerate(format!(
            "hand-eye calibration needs >= 2 motions with non-parallel axes, got {}",
            pairs.len()
        )));
    }

    let mut h = Matrix3::zeros();
    let mut axes = Vec::new();
    for p in pairs {
        let alpha = log_rotation(&p.a.rotation);
        let beta = log_rotation(&p.b.rotation);
        h += beta * alpha.transpose();
        if alpha.norm() > MIN_ANGLE {
            axes.push(alpha.normalize());
        }
    }
    let spread: Matrix3<f64> = axes.iter().map(|a| a * a.transpose()).sum();
    let mut ev: Vec<f64> = spread.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    if axes.len() < 2 || ev[1] <= 1e-12 * ev[0].max(1.0) {
        return Err(CalibError::Degenerate("motion rotation axes are parallel".into()));
    }

    let rx = proper_rotation(&h);

    let n = pairs.len();
    let mut a = DMatrix::<f64>::zeros(3 * n, 3);
    let mut b = DVector::<f64>::zeros(3 * n);
    for (i, p) in pairs.iter().enumerate() {
        let lhs = p.a.rotation - Matrix3::identity();
        let rhs: Vector3<f64> = rx * p.b.translation - p.a.translation;
        for r in 0..3 {
            for c in 0..3 {
                a[(3 * i + r, c)] = lhs[(r, c)];
            }
            b[3 * i + r] = rhs[r];
        }
    }
    let svd = a.svd(true, true);
    if svd.singular_values.min() <= RANK_TOL * svd.singular_values.max() {
        return Err(CalibError::Degenerate("translation system is rank deficient".into()));
    }
    let t = svd.solve(&b, 0.0).map_err(|e| CalibError::Degenerate(e.to_string()))?;
    let x = RigidTransform::new(rx, Vector3::new(t[0], t[1], t[2]));

    let (rot_err, trans_err): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .map(|p| {
            let ax = p.a.compose(&x);
            let xb = x.compose(&p.b);
            (rotation_angle(&(ax.rotation.transpose() * xb.rotation)).to_degrees(), (ax.translation - xb.translation).norm())
        })
        .unzip();
    Ok(HandEyeReport {
        transform: x,
        rot_rmse_deg: rms(rot_err.into_iter()),
        trans_rmse_mm: rms(trans_err.into_iter()),
        sample_count: n,
    })
}
