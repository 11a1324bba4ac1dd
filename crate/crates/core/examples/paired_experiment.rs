//! Runs the bundled dental-stone scenario with and without the virtual
//! fixture and compares damage and clearance.
//!
//! cargo run --release --example paired_experiment

use std::path::Path;
use vfguide::sim::{run_trajectory, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/dental_stone_analog.json");
    let mut scenario = Scenario::load(&path)?;
    println!("{}: {} ticks at {} Hz", scenario.name, scenario.ticks(), 1.0 / scenario.dt_s);
    for vf in [true, false] {
        scenario.vf_enabled = vf;
        let (trace, metrics) = run_trajectory(&scenario)?;
        let blocked = trace.iter().filter(|r| r.f_c != [0.0; 3]).count();
        println!(
            "vf {:<5} drilled {:6.2} mm^3  damage {:5.2} mm^3  min clearance {:+.3} mm  ticks with compliance force {}",
            vf,
            metrics.drilled_volume_mm3,
            metrics.total_damage_mm3(),
            metrics.min_clearance_mm(),
            blocked
        );
    }
    Ok(())
}
