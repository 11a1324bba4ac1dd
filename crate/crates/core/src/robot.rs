//! Serial-chain kinematics and the admittance law.
//!
//! Lengths are in mm, so the linear rows of the Jacobian are mm/s per unit
//! joint rate and the linear admittance gains are (mm/s)/N.

use crate::transform::RigidTransform;
use nalgebra::{DVector, Matrix6, OMatrix, Vector3, Vector6, Dyn, U6};
use serde::{Deserialize, Serialize};

pub type Jacobian = OMatrix<f64, U6, Dyn>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Prismatic,
    Revolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub kind: JointKind,
    /// Unit axis in the joint frame.
    pub axis: [f64; 3],
    /// Parent frame to joint frame at zero displacement.
    #[serde(default)]
    pub origin: RigidTransform,
    /// `[lo, hi]` in mm or rad.
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub joints: Vec<Joint>,
    /// Last joint frame to end-effector frame.
    #[serde(default)]
    pub flange: RigidTransform,
    /// Diagonal of the admittance gain matrix: three linear ((mm/s)/N)
    /// followed by three angular ((rad/s)/(N·mm)).
    pub gains: [f64; 6],
    /// Damped least-squares regularization.
    pub damping: f64,
}

impl RobotModel {
    /// Three orthogonal prismatic axes (x, y, z).
    pub fn gantry(linear_gain: f64, limit_mm: f64) -> Self {
        let joint = |axis| Joint {
            kind: JointKind::Prismatic,
            axis,
            origin: RigidTransform::identity(),
            limits: [-limit_mm, limit_mm],
        };
        Self {
            joints: vec![joint([1.0, 0.0, 0.0]), joint([0.0, 1.0, 0.0]), joint([0.0, 0.0, 1.0])],
            flange: RigidTransform::identity(),
            gains: [linear_gain, linear_gain, linear_gain, 1e-3, 1e-3, 1e-3],
            damping: 1e-6,
        }
    }

    /// Planar two-link arm rotating about z, links of length `l1`, `l2` mm.
    pub fn planar_two_link(l1: f64, l2: f64) -> Self {
        let rev = |origin| Joint {
            kind: JointKind::Revolute,
            axis: [0.0, 0.0, 1.0],
            origin,
            limits: [-std::f64::consts::PI * 4.0, std::f64::consts::PI * 4.0],
        };
        Self {
            joints: vec![rev(RigidTransform::identity()), rev(RigidTransform::from_translation([l1, 0.0, 0.0]))],
            flange: RigidTransform::from_translation([l2, 0.0, 0.0]),
            gains: [1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3],
            damping: 1e-3,
        }
    }

    /// Six-revolute arm with an offset wrist, used for Jacobian checks.
    pub fn six_axis_arm() -> Self {
        let big = std::f64::consts::PI * 2.0;
        let rev = |axis, t| Joint {
            kind: JointKind::Revolute,
            axis,
            origin: RigidTransform::from_translation(t),
            limits: [-big, big],
        };
        Self {
            joints: vec![
                rev([0.0, 0.0, 1.0], [0.0, 0.0, 0.0]),
                rev([0.0, 1.0, 0.0], [0.0, 0.0, 150.0]),
                rev([0.0, 1.0, 0.0], [0.0, 0.0, 300.0]),
                rev([1.0, 0.0, 0.0], [250.0, 0.0, 30.0]),
                rev([0.0, 1.0, 0.0], [0.0, 0.0, 0.0]),
                rev([1.0, 0.0, 0.0], [80.0, 0.0, 0.0]),
            ],
            flange: RigidTransform::from_translation([50.0, 0.0, 20.0]),
            gains: [1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3],
            damping: 1e-3,
        }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.joints.is_empty() {
            return Err("robot needs at least one joint".into());
        }
        for (n, j) in self.joints.iter().enumerate() {
            let len = Vector3::from(j.axis).norm();
            if (len - 1.0).abs() > 1e-9 {
                return Err(format!("joint {n}: axis must be a unit vector (norm {len})"));
            }
            if !(j.limits[0] <= j.limits[1]) {
                return Err(format!("joint {n}: limits {:?} are not ordered", j.limits));
            }
            if !j.origin.is_valid(1e-9) {
                return Err(format!("joint {n}: origin rotation is not orthonormal"));
            }
        }
        if self.gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err("admittance gains must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return Err("damping must be positive".into());
        }
        Ok(())
    }

    fn joint_motion(joint: &Joint, q: f64) -> RigidTransform {
        match joint.kind {
            JointKind::Prismatic => RigidTransform::from_translation([
                joint.axis[0] * q,
                joint.axis[1] * q,
                joint.axis[2] * q,
            ]),
            JointKind::Revolute => RigidTransform::from_axis_angle(joint.axis, q, [0.0; 3]),
        }
    }

    /// End-effector pose in the base frame.
    pub fn forward_kinematics(&self, q: &[f64]) -> RigidTransform {
        assert_eq!(q.len(), self.dof(), "joint vector length");
        let mut t = RigidTransform::identity();
        for (joint, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&joint.origin).compose(&Self::joint_motion(joint, qi));
        }
        t.compose(&self.flange)
    }

    /// Geometric Jacobian of the end-effector origin: rows 0..3 linear
    /// velocity (mm/s), rows 3..6 angular velocity (rad/s), base frame.
    pub fn jacobian(&self, q: &[f64]) -> Jacobian {
        assert_eq!(q.len(), self.dof(), "joint vector length");
        let mut frames = Vec::with_capacity(self.dof());
        let mut t = RigidTransform::identity();
        for (joint, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&joint.origin);
            frames.push((t.translation, t.rotation * Vector3::from(joint.axis)));
            t = t.compose(&Self::joint_motion(joint, qi));
        }
        let p_ee = t.compose(&self.flange).translation;
        let mut jac = Jacobian::zeros(self.dof());
        for (c, (joint, (origin, axis))) in self.joints.iter().zip(frames).enumerate() {
            let (lin, ang) = match joint.kind {
                JointKind::Prismatic => (axis, Vector3::zeros()),
                JointKind::Revolute => (axis.cross(&(p_ee - origin)), axis),
            };
            jac.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, c).copy_from(&ang);
        }
        jac
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) {
        for (qi, j) in q.iter_mut().zip(&self.joints) {
            *qi = qi.clamp(j.limits[0], j.limits[1]);
        }
    }
}

/// Joint velocities minimizing ‖G·F − J·Δq‖, solved as damped least squares
/// `Δq = Jᵀ (J Jᵀ + δ² I)⁻¹ G F`. Joints resting on a limit do not move
/// further past it.
pub fn solve_admittance(model: &RobotModel, q: &[f64], wrench: [f64; 6]) -> Vec<f64> {
    let jac = model.jacobian(q);
    let gf = Vector6::from_fn(|i, _| model.gains[i] * wrench[i]);
    let d2 = model.damping * model.damping;
    let a: Matrix6<f64> = &jac * jac.transpose() + Matrix6::identity() * d2;
    let y = match a.cholesky() {
        Some(ch) => ch.solve(&gf),
        None => a.lu().solve(&gf).unwrap_or_else(Vector6::zeros),
    };
    let dq: DVector<f64> = jac.transpose() * y;
    let mut out: Vec<f64> = dq.iter().copied().collect();
    for ((v, &qi), j) in out.iter_mut().zip(q).zip(&model.joints) {
        if (qi >= j.limits[1] && *v > 0.0) || (qi <= j.limits[0] && *v < 0.0) {
            *v = 0.0;
        }
    }
    out
}

/// Hand force only.
pub fn admittance_hand(model: &RobotModel, q: &[f64], hand_force: [f64; 3]) -> Vec<f64> {
    solve_admittance(model, q, [hand_force[0], hand_force[1], hand_force[2], 0.0, 0.0, 0.0])
}

/// Hand force plus the fixture's compliance force; torques are zero.
pub fn admittance_guided(model: &RobotModel, q: &[f64], hand_force: [f64; 3], compliance: [f64; 3]) -> Vec<f64> {
    // zero components leave the hand force untouched, so F_C = 0 gives
    // exactly the hand-only wrench (signed zeros included)
    let f: [f64; 3] =
        std::array::from_fn(|i| if compliance[i] == 0.0 { hand_force[i] } else { hand_force[i] + compliance[i] });
    solve_admittance(model, q, [f[0], f[1], f[2], 0.0, 0.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gantry_jacobian_is_identity() {
        let m = RobotModel::gantry(1.0, 100.0);
        let j = m.jacobian(&[3.0, -2.0, 7.0]);
        for r in 0..6 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_eq!(j[(r, c)], expect);
            }
        }
    }

    #[test]
    fn single_revolute_column() {
        let r = 40.0;
        let m = RobotModel {
            joints: vec![Joint {
                kind: JointKind::Revolute,
                axis: [0.0, 0.0, 1.0],
                origin: RigidTransform::identity(),
                limits: [-10.0, 10.0],
            }],
            flange: RigidTransform::from_translation([r, 0.0, 0.0]),
            gains: [1.0; 6],
            damping: 1e-3,
        };
        let j = m.jacobian(&[0.0]);
        let col: Vec<f64> = j.column(0).iter().copied().collect();
        assert_eq!(col, vec![0.0, r, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn gantry_admittance_closed_form() {
        let g = 2.5;
        let m = RobotModel::gantry(g, 100.0);
        let dq = solve_admittance(&m, &[0.0; 3], [0.0, 0.0, 4.0, 0.0, 0.0, 0.0]);
        assert_eq!(dq[0], 0.0);
        assert_eq!(dq[1], 0.0);
        assert!((dq[2] - g * 4.0).abs() < 1e-9);
        assert_eq!(solve_admittance(&m, &[0.0; 3], [0.0; 6]), vec![0.0; 3]);
    }

    #[test]
    fn singular_pose_is_bounded() {
        let m = RobotModel::planar_two_link(100.0, 80.0);
        // fully extended along x; pushing along x is unreachable
        let f = [5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let dq = solve_admittance(&m, &[0.0, 0.0], f);
        let norm = dq.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gf = m.gains[0] * 5.0;
        assert!(norm.is_finite());
        assert!(norm <= gf / (2.0 * m.damping) + 1e-9, "{norm}");
    }

    #[test]
    fn limits_stop_outward_motion() {
        let m = RobotModel::gantry(1.0, 10.0);
        let dq = solve_admittance(&m, &[10.0, 0.0, -10.0], [1.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(dq[0], 0.0);
        assert_eq!(dq[2], 0.0);
        let mut q = vec![12.0, 0.0, -11.0];
        m.clamp_to_limits(&mut q);
        assert_eq!(q, vec![10.0, 0.0, -10.0]);
    }

    #[test]
    fn validation() {
        assert!(RobotModel::gantry(1.0, 10.0).validate().is_ok());
        let mut m = RobotModel::gantry(1.0, 10.0);
        m.gains[0] = 0.0;
        assert!(m.validate().is_err());
        let mut m = RobotModel::gantry(1.0, 10.0);
        m.joints[0].limits = [1.0, -1.0];
        assert!(m.validate().is_err());
        let mut m = RobotModel::gantry(1.0, 10.0);
        m.joints.clear();
        assert!(m.validate().is_err());
    }
}
