//! Admittance control on three kinematic models: the joint velocity that a
//! hand force produces, and how a compliance force cancels part of it.
//!
//! cargo run --example admittance

use vfguide::robot::{admittance_guided, admittance_hand, RobotModel};

fn main() {
    let models = [
        ("gantry", RobotModel::gantry(2.0, 100.0), vec![0.0, 0.0, 0.0]),
        ("planar 2-link", RobotModel::planar_two_link(300.0, 250.0), vec![0.4, 0.9]),
        ("6-axis arm", RobotModel::six_axis_arm(), vec![0.1, -0.4, 0.8, 0.0, 0.6, 0.2]),
    ];
    let hand = [2.0, 0.0, -3.0];
    let cancel_z = [0.0, 0.0, 3.0];
    for (name, model, q) in models {
        let tip = model.forward_kinematics(&q).translation;
        let qd = admittance_hand(&model, &q, hand);
        let qd_guided = admittance_guided(&model, &q, hand, cancel_z);
        let v = tip_velocity(&model, &q, &qd);
        let vg = tip_velocity(&model, &q, &qd_guided);
        println!("{name}: tip [{:.1}, {:.1}, {:.1}] mm", tip.x, tip.y, tip.z);
        println!("  hand only  qdot {:.4?}  tip velocity {:.3?}", qd, v);
        println!("  guided     qdot {:.4?}  tip velocity {:.3?}", qd_guided, vg);
    }
}

fn tip_velocity(model: &RobotModel, q: &[f64], qd: &[f64]) -> [f64; 3] {
    let j = model.jacobian(q);
    let mut v = [0.0; 3];
    for (c, w) in qd.iter().enumerate() {
        for (r, vr) in v.iter_mut().enumerate() {
            *vr += j[(r, c)] * w;
        }
    }
    v
}
