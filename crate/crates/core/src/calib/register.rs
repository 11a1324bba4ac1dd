use super::{proper_rotation, rms, CalibError, RigidTransform};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Maps `P` onto `Q`.
    pub transform: RigidTransform,
    pub rmse: f64,
    pub sample_count: usize,
}

/// Closed-form least-squares rigid fit `Q ≈ R·P + t` for corresponding
/// points (covariance SVD; the smallest singular direction is flipped when
/// the unconstrained optimum would be a reflection).
pub fn register_points(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<RegistrationReport, CalibError> {
    if p.len() != q.len() {
        return Err(CalibError::SizeMismatch(p.len(), q.len()));
    }
    if p.len() < 3 {
        return Err(CalibError::Insufficient(format!("registration needs >= 3 points, got {}", p.len())));
    }
    let n = p.len() as f64;
    let pv: Vec<Vector3<f64>> = p.iter().map(|&x| Vector3::from(x)).collect();
    let qv: Vec<Vector3<f64>> = q.iter().map(|&x| Vector3::from(x)).collect();
    let cp = pv.iter().sum::<Vector3<f64>>() / n;
    let cq = qv.iter().sum::<Vector3<f64>>() / n;

    let mut spread = Matrix3::zeros();
    let mut h = Matrix3::zeros();
    for (a, b) in pv.iter().zip(&qv) {
        let da = a - cp;
        spread += da * da.transpose();
        h += da * (b - cq).transpose();
    }
    let sv = spread.symmetric_eigenvalues();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mid = sv.iter().copied().sum::<f64>() - lo - hi;
    if hi <= 0.0 || mid <= 1e-12 * hi {
        return Err(CalibError::Degenerate("source points are collinear or coincident".into()));
    }

    let rotation = proper_rotation(&h);
    let translation = cq - rotation * cp;
    let transform = RigidTransform::new(rotation, translation);
    let rmse = rms(pv.iter().zip(&qv).map(|(a, b)| (rotation * a + translation - b).norm()));
    Ok(RegistrationReport { transform, rmse, sample_count: p.len() })
}
