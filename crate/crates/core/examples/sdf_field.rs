//! Builds the signed distance field of a sphere and probes it along a ray.
//!
//! cargo run --release --example sdf_field

use vfguide::field::{sdf_cache_bytes, signed_distance, parse_sdf_cache};
use vfguide::volume::{make_phantom, PhantomSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec: PhantomSpec = serde_json::from_str(
        r#"{ "dims": [64, 64, 64], "spacing_mm": [0.25, 0.25, 0.25],
             "primitives": [{ "kind": "sphere", "label": 2, "center_mm": [8,8,8], "radius_mm": 3 }] }"#,
    )?;
    let (volume, _) = make_phantom(&spec)?;
    let sdf = signed_distance(&volume, 2)?;
    let (lo, hi) = sdf.min_max();
    println!("field range {lo:.3} .. {hi:.3} mm");

    println!("{:>8} {:>9} {:>9}  direction", "x (mm)", "sdf", "exact");
    for i in 0..=8 {
        let x = 8.0 + i as f64 * 0.75;
        let q = sdf.gradient([x, 8.1, 8.2]);
        let exact = ((x - 8.0).powi(2) + 0.01 + 0.04).sqrt() - 3.0;
        let d = q.direction;
        println!("{x:8.2} {:9.3} {exact:9.3}  [{:+.3}, {:+.3}, {:+.3}]", q.distance, d[0], d[1], d[2]);
    }

    // the cache stores f32 values
    let cached = parse_sdf_cache(&sdf_cache_bytes(&sdf))?;
    let worst = sdf.values.iter().zip(&cached.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("cache round trip max error {worst:.1e} mm");
    Ok(())
}
