//! Signed distance fields built from label volumes, with continuous
//! sampling and finite-difference gradients.
//!
//! Sign convention: positive outside the labeled set, negative inside.
//! Distances are measured between voxel centers. Voxels beyond the grid count
//! as background, so the inside distance is always defined.

mod cache;
mod edt;

pub use cache::{parse_sdf_cache, read_sdf_cache, sdf_cache_bytes, write_sdf_cache};
pub use edt::edt_squared_mask;

use crate::volume::{Grid, LabelVolume, VolumeError};
use rayon::prelude::*;
use std::path::PathBuf;

/// Gradients with a smaller norm than this are reported as degenerate.
pub const DEGENERATE_GRADIENT: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("label {0} is not present in the volume")]
    LabelAbsent(u16),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("corrupt SDF cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Squared Euclidean distance (mm²) from each voxel center to the nearest
/// voxel carrying `label`.
pub fn edt_squared(volume: &LabelVolume, label: u16) -> Result<Vec<f64>, FieldError> {
    let mask: Vec<bool> = volume.labels.par_iter().map(|&l| l == label).collect();
    if !mask.iter().any(|&m| m) {
        return Err(FieldError::LabelAbsent(label));
    }
    Ok(edt_squared_mask(&mask, volume.grid.dims, volume.grid.spacing))
}

/// Scalar signed-distance grid for one anatomy label.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfVolume {
    pub grid: Grid,
    pub label: u16,
    pub values: Vec<f64>,
}

/// Distance and unit gradient at a query point. `direction` points toward
/// increasing distance, away from the anatomy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceQuery {
    pub distance: f64,
    pub direction: [f64; 3],
    pub valid: bool,
}

/// Builds the signed distance field of `label`.
pub fn signed_distance(volume: &LabelVolume, label: u16) -> Result<SdfVolume, FieldError> {
    let grid = volume.grid;
    let outside = edt_squared(volume, label)?;

    // complement transform on a grid padded by one background layer
    let [nx, ny, nz] = grid.dims;
    let pdims = [nx + 2, ny + 2, nz + 2];
    let mut bg = vec![true; pdims[0] * pdims[1] * pdims[2]];
    for k in 0..nz {
        for j in 0..ny {
            let src = grid.index(0, j, k);
            let dst = 1 + pdims[0] * ((j + 1) + pdims[1] * (k + 1));
            for i in 0..nx {
                bg[dst + i] = volume.labels[src + i] != label;
            }
        }
    }
    let inside = edt_squared_mask(&bg, pdims, grid.spacing);

    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if volume.labels[idx] == label {
                let [i, j, k] = grid.coords(idx);
                -inside[(i + 1) + pdims[0] * ((j + 1) + pdims[1] * (k + 1))].sqrt()
            } else {
                outside[idx].sqrt()
            }
        })
        .collect();
    Ok(SdfVolume { grid, label, values })
}

/// Runs `f` on a dedicated pool of `threads` workers (`None` = rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, FieldError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| FieldError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

impl SdfVolume {
    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Trilinear interpolation of voxel-center values. Points outside the
    /// voxel-center bounding box are clamped onto it and the clamp distance
    /// is added, so far-field distances keep growing.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> f64 {
        let g = &self.grid;
        let c = g.to_voxel(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut offset2 = 0.0;
        for a in 0..3 {
            let hi = (g.dims[a] - 1) as f64;
            let cc = c[a].clamp(0.0, hi);
            let d = (c[a] - cc) * g.spacing[a];
            offset2 += d * d;
            if g.dims[a] == 1 {
                continue;
            }
            let i0 = (cc.floor() as usize).min(g.dims[a] - 2);
            base[a] = i0;
            frac[a] = cc - i0 as f64;
        }
        let step = |a: usize| usize::from(g.dims[a] > 1);
        let [i, j, k] = base;
        let (di, dj, dk) = (step(0), step(1), step(2));
        let [tx, ty, tz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.at(i, j, k), self.at(i + di, j, k), tx);
        let c10 = lerp(self.at(i, j + dj, k), self.at(i + di, j + dj, k), tx);
        let c01 = lerp(self.at(i, j, k + dk), self.at(i + di, j, k + dk), tx);
        let c11 = lerp(self.at(i, j + dj, k + dk), self.at(i + di, j + dj, k + dk), tx);
        let v = lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
        v + offset2.sqrt()
    }

    /// Distance plus normalized central-difference gradient, one voxel
    /// spacing per axis.
    pub fn gradient(&self, p: [f64; 3]) -> DistanceQuery {
        let distance = self.sample_trilinear(p);
        let mut grad = [0.0; 3];
        for a in 0..3 {
            let h = self.grid.spacing[a];
            let mut fwd = p;
            let mut back = p;
            fwd[a] += h;
            back[a] -= h;
            grad[a] = (self.sample_trilinear(fwd) - self.sample_trilinear(back)) / (2.0 * h);
        }
        let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        if norm < DEGENERATE_GRADIENT || !norm.is_finite() {
            return DistanceQuery { distance, direction: [0.0; 3], valid: false };
        }
        DistanceQuery { distance, direction: [grad[0] / norm, grad[1] / norm, grad[2] / norm], valid: true }
    }
}
