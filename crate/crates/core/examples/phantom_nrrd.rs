//! Rasterizes a small phantom, writes it as NRRD and reads it back.
//!
//! cargo run --example phantom_nrrd

use vfguide::volume::{make_phantom, parse_label_volume, parse_nrrd_header, write_nrrd_bytes, PhantomSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec: PhantomSpec = serde_json::from_str(
        r#"{
      "dims": [48, 48, 48], "spacing_mm": [0.5, 0.5, 0.5],
      "primitives": [
        { "kind": "box", "label": 1, "name": "bone", "min_mm": [0,0,0], "max_mm": [24,24,16] },
        { "kind": "capsule", "label": 3, "name": "nerve", "points_mm": [[2,12,8],[22,12,8]], "radius_mm": 1.0 },
        { "kind": "sphere", "label": 2, "name": "cochlea", "center_mm": [12,6,10], "radius_mm": 2.5 }
      ]
    }"#,
    )?;
    let (volume, segments) = make_phantom(&spec)?;
    for s in &segments.entries {
        println!("{:>2} {:<8} {:>6} voxels", s.label, s.name, volume.count(s.label));
    }

    let bytes = write_nrrd_bytes(&volume, &segments)?;
    let header = parse_nrrd_header(&bytes)?;
    println!("encoding {:?}, {} custom fields, payload {} bytes", header.encoding, header.custom_fields.len(), header.payload_len());

    let (back, back_segments) = parse_label_volume(&bytes)?;
    assert_eq!(back.labels, volume.labels);
    assert_eq!(back_segments, segments);
    println!("round trip ok");
    Ok(())
}
