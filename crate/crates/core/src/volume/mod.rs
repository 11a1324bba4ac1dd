//! Voxel label volumes, the NRRD subset used to exchange them, and synthetic
//! phantoms.

mod nrrd;
mod phantom;

pub use nrrd::{
    header_for, load_label_volume, parse_label_volume, parse_nrrd_header, write_nrrd,
    write_nrrd_bytes, Encoding, Endianness, NrrdHeader, SampleType,
};
pub use phantom::{make_phantom, phantom_warnings, PhantomSpec, Primitive, PrimitiveShape};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Label value reserved for background voxels.
pub const BACKGROUND: u16 = 0;

#[derive(Debug, thiserror::Error)]
pub enum VolumeError {
    #[error("bad magic line: expected NRRD0001..NRRD0005, found {0:?}")]
    BadMagic(String),
    #[error("unsupported dimension {0}, only 3D volumes are accepted")]
    UnsupportedDimension(usize),
    #[error("space directions are not axis-aligned (off-diagonal magnitude {0:e})")]
    NotAxisAligned(f64),
    #[error("unsupported sample type {0:?}")]
    UnsupportedType(String),
    #[error("unsupported encoding {0:?}")]
    UnsupportedEncoding(String),
    #[error("gzip payloads need the `gzip` build feature")]
    GzipDisabled,
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("malformed field `{field}`: {msg}")]
    Malformed { field: String, msg: String },
    #[error("detached data files are not supported")]
    DetachedData,
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("float samples cannot hold label IDs")]
    FloatLabels,
    #[error("invalid label value {0} in payload")]
    BadLabel(i64),
    #[error("invalid volume geometry: {0}")]
    Geometry(String),
    #[error("invalid segment table: {0}")]
    Segments(String),
    #[error("invalid phantom: {0}")]
    Phantom(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Axis-aligned voxel lattice: `origin` is the world position (mm) of the
/// center of voxel (0,0,0), `spacing` the center-to-center step per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self, VolumeError> {
        let grid = Self { dims, spacing, origin };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        for axis in 0..3 {
            if self.dims[axis] == 0 {
                return Err(VolumeError::Geometry(format!("dims[{axis}] must be >= 1")));
            }
            if !(self.spacing[axis] > 0.0 && self.spacing[axis].is_finite()) {
                return Err(VolumeError::Geometry(format!(
                    "spacing[{axis}] = {} must be positive",
                    self.spacing[axis]
                )));
            }
            if !self.origin[axis].is_finite() {
                return Err(VolumeError::Geometry(format!("origin[{axis}] is not finite")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    /// World position (mm) of a voxel center.
    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn to_voxel(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }
}

/// Dense label grid. Labels are stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub grid: Grid,
    pub labels: Vec<u16>,
}

impl LabelVolume {
    pub fn new(grid: Grid, labels: Vec<u16>) -> Result<Self, VolumeError> {
        grid.validate()?;
        if labels.len() != grid.len() {
            return Err(VolumeError::Geometry(format!(
                "labels length {} does not match dims {:?}",
                labels.len(),
                grid.dims
            )));
        }
        Ok(Self { grid, labels })
    }

    pub fn background(grid: Grid) -> Result<Self, VolumeError> {
        let n = grid.len();
        Self::new(grid, vec![BACKGROUND; n])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u16 {
        self.labels[self.grid.index(i, j, k)]
    }

    pub fn count(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn contains_label(&self, label: u16) -> bool {
        self.labels.contains(&label)
    }

    /// Distinct nonzero labels in ascending order.
    pub fn present_labels(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=u16::MAX).filter(|&l| seen[l as usize]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub label: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[f64; 3]>,
}

/// Named segments carried alongside a label volume (3D Slicer convention).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentTable {
    pub entries: Vec<Segment>,
}

impl SegmentTable {
    pub fn new(entries: Vec<Segment>) -> Result<Self, VolumeError> {
        let table = Self { entries };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        let mut seen = std::collections::BTreeSet::new();
        for seg in &self.entries {
            if seg.label == BACKGROUND {
                return Err(VolumeError::Segments(format!(
                    "segment {:?} uses the background label 0",
                    seg.name
                )));
            }
            if !seen.insert(seg.label) {
                return Err(VolumeError::Segments(format!("duplicate label value {}", seg.label)));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn by_label(&self, label: u16) -> Option<&Segment> {
        self.entries.iter().find(|s| s.label == label)
    }

    pub fn by_name(&self, name: &str) -> Option<&Segment> {
        self.entries.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new([3, 4, 5], [1.0; 3], [0.0; 3]).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        let g = Grid::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert!(LabelVolume::new(g, vec![0; 7]).is_err());
    }

    #[test]
    fn segment_table_rules() {
        let seg = |name: &str, label| Segment { name: name.into(), label, color: None };
        assert!(SegmentTable::new(vec![seg("a", 1), seg("b", 2)]).is_ok());
        assert!(SegmentTable::new(vec![seg("a", 0)]).is_err());
        assert!(SegmentTable::new(vec![seg("a", 1), seg("b", 1)]).is_err());
    }
}
