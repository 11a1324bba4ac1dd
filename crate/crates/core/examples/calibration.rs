//! Pivot, hand-eye, point registration and gravity-bias compensation on
//! seeded synthetic data, with recovery errors against the known truth.
//!
//! cargo run --release --example calibration

use vfguide::calib::{fit_gravity_model, hand_eye_calibrate, pivot_calibrate, register_points, synth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;

    let d = synth::pivot_poses(seed, 20, [10.0, 5.0, 120.0], [0.0, 0.0, 0.0], 0.01);
    let r = pivot_calibrate(&d.poses)?;
    println!("pivot: tip {:.3?} (truth {:?}), rmse {:.4} mm", r.tip_offset, d.tip_offset, r.rmse);

    let d = synth::hand_eye_pairs(seed, 30, 0.02);
    let r = hand_eye_calibrate(&d.pairs)?;
    println!(
        "hand-eye: rotation error {:.4} deg, translation error {:.3} mm, rmse {:.3} mm / {:.4} deg",
        r.transform.rotation_angle_to(&d.x).to_degrees(),
        (r.transform.translation - d.x.translation).norm(),
        r.trans_rmse_mm,
        r.rot_rmse_deg
    );

    let d = synth::registration_set(seed, 8, 0.1);
    let r = register_points(&d.p, &d.q)?;
    println!(
        "registration: rotation error {:.4} deg, translation error {:.3} mm, rmse {:.3} mm",
        r.transform.rotation_angle_to(&d.truth).to_degrees(),
        (r.transform.translation - d.truth.translation).norm(),
        r.rmse
    );

    let truth = synth::bias_field(seed, 3, 2.0);
    let samples = synth::gravity_samples(seed + 1, &truth, 400, 0.05);
    let model = fit_gravity_model(&samples, 3)?;
    let eval = synth::evaluate_compensation(seed + 2, &truth, &model, 500, 0.05);
    println!(
        "gravity: held-out residual {:.3} N rms (uncompensated {:.3} N), bias energy removed {:.1}%",
        eval.residual_rms,
        eval.uncompensated_rms,
        100.0 * eval.energy_reduction
    );
    Ok(())
}
