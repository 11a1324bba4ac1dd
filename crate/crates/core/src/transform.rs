//! Rigid transforms (rotation + translation in mm).

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::from(t) }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
        Self { rotation: *rot.matrix(), translation: Vector3::from(t) }
    }

    /// From a unit quaternion `[w, x, y, z]` (normalized here).
    pub fn from_quaternion(wxyz: [f64; 4], t: [f64; 3]) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]));
        Self { rotation: *q.to_rotation_matrix().matrix(), translation: Vector3::from(t) }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        let mut out = [q.w, q.i, q.j, q.k];
        if out[0] < 0.0 {
            out = out.map(|c| -c);
        }
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        (self.rotation * Vector3::from(p) + self.translation).into()
    }

    pub fn apply_vector(&self, v: [f64; 3]) -> [f64; 3] {
        (self.rotation * Vector3::from(v)).into()
    }

    /// ‖RᵀR − I‖ (Frobenius) and |det R − 1|.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        (e, (self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let (e, d) = self.orthonormality_error();
        e <= tol && d <= tol && self.translation.iter().all(|v| v.is_finite())
    }

    /// Rotation angle (rad) of the relative rotation between two transforms.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

/// Angle of a rotation matrix, robust near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() / 2.0;
    s.atan2(c)
}

/// Rotation vector (axis·angle) of a rotation matrix.
pub fn log_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = Rotation3::from_matrix_unchecked(*r);
    rot.scaled_axis()
}

/// JSON form: `{"quaternion_wxyz": [w,x,y,z], "translation_mm": [x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub quaternion_wxyz: [f64; 4],
    pub translation_mm: [f64; 3],
}

impl From<&RigidTransform> for PoseRecord {
    fn from(t: &RigidTransform) -> Self {
        Self { quaternion_wxyz: t.quaternion(), translation_mm: t.translation.into() }
    }
}

impl From<PoseRecord> for RigidTransform {
    fn from(p: PoseRecord) -> Self {
        RigidTransform::from_quaternion(p.quaternion_wxyz, p.translation_mm)
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        PoseRecord::deserialize(d).map(Into::into)
    }
}
