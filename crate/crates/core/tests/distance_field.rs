use vfguide::field::{edt_squared, read_sdf_cache, signed_distance, write_sdf_cache};
use vfguide::volume::{make_phantom, PhantomSpec};

fn sphere_phantom(spacing: [f64; 3], radius: f64) -> PhantomSpec {
    serde_json::from_value(serde_json::json!({
        "dims": [(20.0 / spacing[0]) as usize, (20.0 / spacing[1]) as usize, (20.0 / spacing[2]) as usize],
        "spacing_mm": spacing,
        "primitives": [{"kind": "sphere", "label": 5, "center_mm": [10.0, 10.0, 10.0], "radius_mm": radius}]
    }))
    .unwrap()
}

fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = (0..3).map(|i| a[i] * b[i]).sum();
    let na = (0..3).map(|i| a[i] * a[i]).sum::<f64>().sqrt();
    let nb = (0..3).map(|i| b[i] * b[i]).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Direction errors (mean, worst) in degrees against the analytic radial
/// direction, over a spiral of 400 points at `clearances` from the surface.
fn radial_errors(spacing: [f64; 3], radius: f64, clearances: &[f64]) -> (f64, f64) {
    let (vol, _) = make_phantom(&sphere_phantom(spacing, radius)).unwrap();
    let sdf = signed_distance(&vol, 5).unwrap();
    let n = 400;
    let (mut sum, mut worst) = (0.0, 0.0f64);
    for s in 0..n {
        let z = 1.0 - 2.0 * (s as f64 + 0.5) / n as f64;
        let phi = s as f64 * 2.399963;
        let r_xy = (1.0 - z * z).sqrt();
        let dir = [r_xy * phi.cos(), r_xy * phi.sin(), z];
        let r = radius + clearances[s % clearances.len()];
        let q = sdf.gradient([10.0 + r * dir[0], 10.0 + r * dir[1], 10.0 + r * dir[2]]);
        assert!(q.valid);
        let a = angle_deg(q.direction, dir);
        sum += a;
        worst = worst.max(a);
    }
    (sum / n as f64, worst)
}

#[test]
fn point_sphere_gradient_within_one_degree() {
    // a sphere smaller than a voxel labels exactly one voxel center
    for spacing in [[0.5; 3], [0.25; 3]] {
        let h = spacing[0];
        let (_, worst) = radial_errors(spacing, 0.01, &[4.0 * h, 6.0 * h, 10.0 * h, 3.0]);
        assert!(worst < 1.0, "worst {worst} deg at spacing {h}");
    }
}

#[test]
fn voxelized_sphere_gradient_error_is_bounded() {
    // staircase of voxel centers: a few degrees on average, not 1
    let (mean, worst) = radial_errors([0.25; 3], 5.0, &[1.0, 2.0, 3.0, 4.0]);
    assert!(mean < 5.0 && worst < 22.0, "mean {mean} worst {worst}");
    let (mean, worst) = radial_errors([0.25, 0.5, 0.5], 5.0, &[2.0, 3.0, 4.0]);
    assert!(mean < 6.0 && worst < 25.0, "mean {mean} worst {worst}");
}

#[test]
fn sphere_distance_tracks_radius() {
    let (vol, _) = make_phantom(&sphere_phantom([0.25, 0.5, 0.5], 5.0)).unwrap();
    let sdf = signed_distance(&vol, 5).unwrap();
    for r in [6.0, 7.0, 8.5] {
        for dir in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.6, 0.8]] {
            let d = sdf.sample_trilinear([10.0 + r * dir[0], 10.0 + r * dir[1], 10.0 + r * dir[2]]);
            assert!((d - (r - 5.0)).abs() <= 0.5, "d {d} at r {r}");
        }
    }
}

#[test]
fn sign_convention() {
    let (vol, _) = make_phantom(&sphere_phantom([0.5; 3], 5.0)).unwrap();
    let sdf = signed_distance(&vol, 5).unwrap();
    assert!(sdf.sample_trilinear([10.0, 10.0, 10.0]) < -4.0);
    assert!(sdf.sample_trilinear([1.0, 1.0, 1.0]) > 0.0);
    // far outside the grid the distance keeps growing
    let far = sdf.sample_trilinear([60.0, 10.0, 10.0]);
    assert!(far > 40.0, "{far}");
}

#[test]
fn cache_roundtrip_stores_f32() {
    let (vol, _) = make_phantom(&sphere_phantom([0.5, 0.5, 1.0], 5.0)).unwrap();
    let sdf = signed_distance(&vol, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.vfsdf");
    write_sdf_cache(&sdf, &path).unwrap();
    let back = read_sdf_cache(&path).unwrap();
    assert_eq!(back.grid, sdf.grid);
    assert_eq!(back.label, 5);
    assert!(back.values.iter().zip(&sdf.values).all(|(a, b)| *a == *b as f32 as f64));
}

#[test]
fn absent_label_is_an_error() {
    let (vol, _) = make_phantom(&sphere_phantom([1.0; 3], 5.0)).unwrap();
    assert!(edt_squared(&vol, 9).is_err());
    assert!(signed_distance(&vol, 9).is_err());
}
