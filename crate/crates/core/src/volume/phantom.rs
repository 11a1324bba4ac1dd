//! Synthetic anatomy phantoms rasterized from analytic primitives.
//!
//! A phantom document looks like
//!
//! ```json
//! {
//!   "dims": [64, 64, 80],
//!   "spacing_mm": [0.25, 0.25, 0.25],
//!   "origin_mm": [0, 0, 0],
//!   "primitives": [
//!     {"kind": "box", "label": 1, "name": "dental_stone", "min_mm": [0,0,0], "max_mm": [16,16,20]},
//!     {"kind": "sphere", "label": 2, "name": "labyrinth", "center_mm": [8,8,7], "radius_mm": 3}
//!   ]
//! }
//! ```
//!
//! Primitive kinds: `sphere {center_mm, radius_mm}`, `box {min_mm, max_mm}`,
//! `ellipsoid {center_mm, radii_mm}` and `capsule {points_mm, radius_mm}`
//! (a tube of constant radius around a polyline). A voxel belongs to a
//! primitive when its center does; later primitives overwrite earlier ones.

use super::{Grid, LabelVolume, Segment, SegmentTable, VolumeError, BACKGROUND};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveShape {
    Sphere { center_mm: [f64; 3], radius_mm: f64 },
    Box { min_mm: [f64; 3], max_mm: [f64; 3] },
    Ellipsoid { center_mm: [f64; 3], radii_mm: [f64; 3] },
    Capsule { points_mm: Vec<[f64; 3]>, radius_mm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub label: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[f64; 3]>,
    #[serde(flatten)]
    pub shape: PrimitiveShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    #[serde(default)]
    pub origin_mm: [f64; 3],
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl PhantomSpec {
    pub fn grid(&self) -> Result<Grid, VolumeError> {
        Grid::new(self.dims, self.spacing_mm, self.origin_mm)
    }
}

impl PrimitiveShape {
    /// World-space bounding box (min, max).
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            PrimitiveShape::Sphere { center_mm: c, radius_mm: r } => {
                ([c[0] - r, c[1] - r, c[2] - r], [c[0] + r, c[1] + r, c[2] + r])
            }
            PrimitiveShape::Box { min_mm, max_mm } => (*min_mm, *max_mm),
            PrimitiveShape::Ellipsoid { center_mm: c, radii_mm: r } => (
                [c[0] - r[0], c[1] - r[1], c[2] - r[2]],
                [c[0] + r[0], c[1] + r[1], c[2] + r[2]],
            ),
            PrimitiveShape::Capsule { points_mm, radius_mm: r } => {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for p in points_mm {
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a] - r);
                        hi[a] = hi[a].max(p[a] + r);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            PrimitiveShape::Sphere { center_mm: c, radius_mm: r } => dist2(p, *c) <= r * r,
            PrimitiveShape::Box { min_mm, max_mm } => {
                (0..3).all(|a| p[a] >= min_mm[a] && p[a] <= max_mm[a])
            }
            PrimitiveShape::Ellipsoid { center_mm: c, radii_mm: r } => {
                (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
            }
            PrimitiveShape::Capsule { points_mm, radius_mm: r } => {
                if points_mm.len() == 1 {
                    return dist2(p, points_mm[0]) <= r * r;
                }
                points_mm.windows(2).any(|w| segment_dist2(p, w[0], w[1]) <= r * r)
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self {
            PrimitiveShape::Sphere { radius_mm, .. } if !positive(*radius_mm) => {
                Err("sphere radius must be positive".into())
            }
            PrimitiveShape::Box { min_mm, max_mm } if (0..3).any(|a| min_mm[a] > max_mm[a]) => {
                Err("box min must not exceed max".into())
            }
            PrimitiveShape::Ellipsoid { radii_mm, .. } if !radii_mm.iter().all(|&r| positive(r)) => {
                Err("ellipsoid radii must be positive".into())
            }
            PrimitiveShape::Capsule { points_mm, radius_mm } => {
                if points_mm.is_empty() {
                    Err("capsule needs at least one point".into())
                } else if !positive(*radius_mm) {
                    Err("capsule radius must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Squared distance from `p` to the segment `a`-`b`.
pub(crate) fn segment_dist2(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]])
}

/// Non-fatal problems: primitives whose bounds miss the grid entirely.
pub fn phantom_warnings(spec: &PhantomSpec) -> Vec<String> {
    let Ok(grid) = spec.grid() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (n, prim) in spec.primitives.iter().enumerate() {
        let (lo, hi) = prim.shape.bounds();
        let outside = (0..3).any(|a| {
            let first = grid.origin[a];
            let last = grid.origin[a] + (grid.dims[a] - 1) as f64 * grid.spacing[a];
            hi[a] < first || lo[a] > last
        });
        if outside {
            out.push(format!("primitive {n} (label {}) lies entirely outside the grid", prim.label));
        }
    }
    out
}

/// Rasterizes a phantom. Deterministic for a given spec.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(LabelVolume, SegmentTable), VolumeError> {
    let grid = spec.grid()?;
    for (n, prim) in spec.primitives.iter().enumerate() {
        if prim.label == BACKGROUND {
            return Err(VolumeError::Phantom(format!("primitive {n} uses background label 0")));
        }
        prim.shape
            .validate()
            .map_err(|msg| VolumeError::Phantom(format!("primitive {n}: {msg}")))?;
    }
    for w in phantom_warnings(spec) {
        log::warn!("{w}");
    }

    let mut volume = LabelVolume::background(grid)?;
    for prim in &spec.primitives {
        let (lo, hi) = prim.shape.bounds();
        let mut range = [(0usize, 0usize); 3];
        let mut empty = false;
        for a in 0..3 {
            let first = ((lo[a] - grid.origin[a]) / grid.spacing[a]).ceil().max(0.0);
            let last = ((hi[a] - grid.origin[a]) / grid.spacing[a])
                .floor()
                .min((grid.dims[a] - 1) as f64);
            if first > last {
                empty = true;
                break;
            }
            range[a] = (first as usize, last as usize);
        }
        if empty {
            continue;
        }
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    if prim.shape.contains(grid.center(i, j, k)) {
                        let idx = grid.index(i, j, k);
                        volume.labels[idx] = prim.label;
                    }
                }
            }
        }
    }

    let mut entries: Vec<Segment> = Vec::new();
    for prim in &spec.primitives {
        if entries.iter().any(|s| s.label == prim.label) {
            continue;
        }
        entries.push(Segment {
            name: prim.name.clone().unwrap_or_else(|| format!("segment_{}", prim.label)),
            label: prim.label,
            color: prim.color,
        });
    }
    Ok((volume, SegmentTable::new(entries)?))
}
