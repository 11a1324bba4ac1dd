//! Exact squared Euclidean distance transform on anisotropic voxel grids.
//!
//! Three separable passes: a two-sweep 1D scan along x, then lower-envelope
//! minimization of sampled parabolas along y and z. Each pass handles
//! independent rows, which is where the parallelism comes from; every row is
//! computed by the same sequential code, so results do not depend on the
//! number of workers.

use rayon::prelude::*;

/// Squared distance (mm²) from every voxel center to the nearest voxel center
/// where `site` is true. Voxels with no site anywhere get `f64::INFINITY`.
pub fn edt_squared_mask(site: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    assert_eq!(site.len(), nx * ny * nz, "mask length does not match dims");
    let mut out = vec![0.0f64; site.len()];

    out.par_chunks_mut(nx)
        .zip(site.par_chunks(nx))
        .for_each(|(row, mask)| scan_row(mask, spacing[0], row));

    if ny > 1 {
        let w = spacing[1];
        out.par_chunks_mut(nx * ny).for_each(|slice| {
            let mut scratch = Envelope::new(ny);
            let mut col = vec![0.0; ny];
            for i in 0..nx {
                for j in 0..ny {
                    col[j] = slice[i + nx * j];
                }
                scratch.run(&mut col, w);
                for j in 0..ny {
                    slice[i + nx * j] = col[j];
                }
            }
        });
    }

    if nz > 1 {
        let w = spacing[2];
        let plane = nx * ny;
        let src = &out;
        // one (x, z) block per y row, computed in parallel and scattered back
        let blocks: Vec<Vec<f64>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let mut scratch = Envelope::new(nz);
                let mut col = vec![0.0; nz];
                let mut block = vec![0.0; nx * nz];
                for i in 0..nx {
                    for k in 0..nz {
                        col[k] = src[i + nx * j + plane * k];
                    }
                    scratch.run(&mut col, w);
                    block[i * nz..(i + 1) * nz].copy_from_slice(&col);
                }
                block
            })
            .collect();
        for (j, block) in blocks.iter().enumerate() {
            for i in 0..nx {
                for k in 0..nz {
                    out[i + nx * j + plane * k] = block[i * nz + k];
                }
            }
        }
    }
    out
}

/// 1D pass: squared distance to the nearest site in the row.
fn scan_row(mask: &[bool], spacing: f64, out: &mut [f64]) {
    let n = mask.len();
    let mut idx = vec![usize::MAX; n];
    let mut last = None;
    for i in 0..n {
        if mask[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            idx[i] = i - l;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if mask[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            idx[i] = idx[i].min(l - i);
        }
    }
    for i in 0..n {
        out[i] = if idx[i] == usize::MAX {
            f64::INFINITY
        } else {
            let d = idx[i] as f64 * spacing;
            d * d
        };
    }
}

/// Lower envelope of parabolas `f[q] + (s·(x − q))²`, evaluated at the
/// integer positions.
struct Envelope {
    apex: Vec<usize>,
    bound: Vec<f64>,
    input: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { apex: vec![0; n], bound: vec![0.0; n + 1], input: vec![0.0; n] }
    }

    fn run(&mut self, f: &mut [f64], spacing: f64) {
        let n = f.len();
        self.input.copy_from_slice(f);
        let g = &self.input;
        let w = spacing * spacing;
        let intersect = |q: usize, p: usize| -> f64 {
            let (qf, pf) = (q as f64, p as f64);
            ((g[q] + w * qf * qf) - (g[p] + w * pf * pf)) / (2.0 * w * (qf - pf))
        };

        let mut k: isize = -1;
        for q in 0..n {
            if !g[q].is_finite() {
                continue;
            }
            while k >= 0 {
                let s = intersect(q, self.apex[k as usize]);
                if s <= self.bound[k as usize] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            let ku = k as usize;
            self.apex[ku] = q;
            self.bound[ku] = if ku == 0 { f64::NEG_INFINITY } else { intersect(q, self.apex[ku - 1]) };
            self.bound[ku + 1] = f64::INFINITY;
        }
        if k < 0 {
            f.fill(f64::INFINITY);
            return;
        }

        let mut seg = 0usize;
        for (x, slot) in f.iter_mut().enumerate() {
            let xf = x as f64;
            while self.bound[seg + 1] < xf {
                seg += 1;
            }
            let q = self.apex[seg];
            let d = (x as f64 - q as f64) * spacing;
            *slot = g[q] + d * d;
        }
    }
}
