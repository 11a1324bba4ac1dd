use super::{rms, CalibError, RigidTransform, RANK_TOL};
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotReport {
    /// Tip position in the marker frame (mm).
    pub tip_offset: [f64; 3],
    /// Fixed pivot point in the tracker frame (mm).
    pub pivot_point: [f64; 3],
    pub rmse: f64,
    pub sample_count: usize,
}

/// Solves `Rᵢ·t + pᵢ = p_pivot` for the tip offset `t` and pivot point over
/// all marker poses, in the least-squares sense (SVD of the stacked system).
pub fn pivot_calibrate(poses: &[RigidTransform]) -> Result<PivotReport, CalibError> {
    if poses.len() < 3 {
        return Err(CalibError::Insufficient(format!("pivot calibration needs >= 3 poses, got {}", poses.len())));
    }
    let n = poses.len();
    let mut a = DMatrix::<f64>::zeros(3 * n, 6);
    let mut b = DVector::<f64>::zeros(3 * n);
    for (i, pose) in poses.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                a[(3 * i + r, c)] = pose.rotation[(r, c)];
            }
            a[(3 * i + r, 3 + r)] = -1.0;
            b[3 * i + r] = -pose.translation[r];
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= RANK_TOL * smax {
        return Err(CalibError::Degenerate(
            "pivot poses do not span enough rotation axes (rank deficient)".into(),
        ));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| CalibError::Degenerate(e.to_string()))?;
    let tip = Vector3::new(x[0], x[1], x[2]);
    let pivot = Vector3::new(x[3], x[4], x[5]);
    let rmse = rms(poses.iter().map(|p| (p.rotation * tip + p.translation - pivot).norm()));
    Ok(PivotReport { tip_offset: tip.into(), pivot_point: pivot.into(), rmse, sample_count: n })
}
