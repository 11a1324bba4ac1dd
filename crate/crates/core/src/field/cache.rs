//! Binary SDF cache.
//!
//! Layout (little-endian): magic `VFSDF001`, dims as 3×u32, spacing as 3×f64,
//! origin as 3×f64, label as u16, two zero bytes, then one f32 per voxel in
//! x-fastest order.

use super::{FieldError, SdfVolume};
use crate::volume::Grid;
use std::path::Path;

const MAGIC: &[u8; 8] = b"VFSDF001";
const HEADER_LEN: usize = 8 + 12 + 24 + 24 + 4;

pub fn sdf_cache_bytes(sdf: &SdfVolume) -> Vec<u8> {
    let g = &sdf.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * sdf.values.len());
    out.extend_from_slice(MAGIC);
    for &d in &g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in g.spacing.iter().chain(&g.origin) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&sdf.label.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    for &v in &sdf.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn parse_sdf_cache(bytes: &[u8]) -> Result<SdfVolume, FieldError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(FieldError::Cache("missing VFSDF001 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u32_at(8), u32_at(12), u32_at(16)];
    let spacing = [f64_at(20), f64_at(28), f64_at(36)];
    let origin = [f64_at(44), f64_at(52), f64_at(60)];
    let label = u16::from_le_bytes([bytes[68], bytes[69]]);
    let grid = Grid::new(dims, spacing, origin)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * grid.len() {
        return Err(FieldError::Cache(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            4 * grid.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(SdfVolume { grid, label, values })
}

pub fn write_sdf_cache(sdf: &SdfVolume, path: impl AsRef<Path>) -> Result<(), FieldError> {
    let path = path.as_ref();
    std::fs::write(path, sdf_cache_bytes(sdf)).map_err(|source| FieldError::Io { path: path.into(), source })
}

pub fn read_sdf_cache(path: impl AsRef<Path>) -> Result<SdfVolume, FieldError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FieldError::Io { path: path.into(), source })?;
    parse_sdf_cache(&bytes)
}
