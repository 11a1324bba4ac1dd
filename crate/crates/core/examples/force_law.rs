//! Tabulates the guidance force law and shows how the compliance force
//! treats pushes toward and away from an anatomy.
//!
//! cargo run --example force_law

use vfguide::guidance::{compliance_force, per_anatomy_force, ForceLawParams};

fn main() {
    for (name, p) in [("dental stone", ForceLawParams::DENTAL_STONE), ("temporal bone", ForceLawParams::TEMPORAL_BONE)] {
        println!("{name}: tau0 {} mm, tauf {} mm, lambda {} /mm", p.tau0, p.tauf, p.lambda);
        for d in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 3.99, 4.0] {
            println!("  d = {d:4.2} mm  gain {:.4}", p.gain(d));
        }
    }

    // anatomy below the tip: the fixture pushes up (+z)
    let p = ForceLawParams::DENTAL_STONE;
    let away = [0.0, 0.0, 1.0];
    for hand in [[0.0, 0.0, -4.0], [3.0, 0.0, -2.0], [0.0, 0.0, 4.0]] {
        let f_max = hand.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("hand {hand:?}");
        for d in [0.5, 1.5, 3.0] {
            let f_sdf = per_anatomy_force(d, away, true, f_max, &p);
            let f_c = compliance_force(hand, f_sdf, false);
            let net: Vec<f64> = (0..3).map(|i| hand[i] + f_c[i]).collect();
            println!("  d = {d} mm  F_sdf {:?}  F_c {:?}  net {:.3?}", round(f_sdf), round(f_c), net);
        }
    }
}

fn round(v: [f64; 3]) -> [f64; 3] {
    v.map(|x| (x * 1000.0).round() / 1000.0 + 0.0)
}
