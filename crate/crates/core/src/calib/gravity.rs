//! Orientation-dependent force bias (drill weight plus cable drag) modeled
//! per output axis as a tensor-product Bernstein polynomial over two
//! orientation parameters `(u, v) ∈ [0,1]²`.

use super::{rms, CalibError, RANK_TOL};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `C(n, i)·tⁱ·(1−t)ⁿ⁻ⁱ`
pub fn bernstein(n: usize, i: usize, t: f64) -> f64 {
    let mut binom = 1.0;
    for k in 0..i {
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    binom * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32)
}

/// Maps an end-effector rotation (base frame, z up) to orientation
/// parameters: azimuth and elevation of the gravity direction seen in the
/// tool frame, each normalized to `[0, 1]`.
pub fn orientation_params(rotation: &Matrix3<f64>) -> (f64, f64) {
    let g_tool = rotation.transpose() * Vector3::new(0.0, 0.0, -1.0);
    let azimuth = g_tool.y.atan2(g_tool.x);
    let elevation = g_tool.z.clamp(-1.0, 1.0).asin();
    (((azimuth + PI) / (2.0 * PI)).clamp(0.0, 1.0), ((elevation + PI / 2.0) / PI).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GravityModel {
    pub degree: usize,
    /// Per output axis, `(degree+1)²` coefficients; entry `i·(degree+1)+j`
    /// multiplies `B_i(u)·B_j(v)`.
    pub coefficients: [Vec<f64>; 3],
    #[serde(default)]
    pub fit_rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravitySample {
    pub uv: [f64; 2],
    pub force: [f64; 3],
}

impl GravityModel {
    pub fn zero(degree: usize) -> Self {
        let n = (degree + 1) * (degree + 1);
        Self { degree, coefficients: [vec![0.0; n], vec![0.0; n], vec![0.0; n]], fit_rmse: 0.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = (self.degree + 1) * (self.degree + 1);
        if self.coefficients.iter().any(|c| c.len() != n) {
            return Err(format!("each axis needs {n} coefficients for degree {}", self.degree));
        }
        Ok(())
    }

    fn basis(&self, u: f64, v: f64) -> Vec<f64> {
        let n = self.degree;
        let bu: Vec<f64> = (0..=n).map(|i| bernstein(n, i, u)).collect();
        let bv: Vec<f64> = (0..=n).map(|j| bernstein(n, j, v)).collect();
        bu.iter().flat_map(|a| bv.iter().map(move |b| a * b)).collect()
    }

    pub fn evaluate(&self, u: f64, v: f64) -> [f64; 3] {
        let basis = self.basis(u, v);
        let mut out = [0.0; 3];
        for (axis, coeffs) in self.coefficients.iter().enumerate() {
            out[axis] = coeffs.iter().zip(&basis).map(|(c, b)| c * b).sum();
        }
        out
    }
}

/// Per-axis linear least squares in the tensor-product Bernstein basis.
pub fn fit_gravity_model(samples: &[GravitySample], degree: usize) -> Result<GravityModel, CalibError> {
    let terms = (degree + 1) * (degree + 1);
    if samples.len() < terms {
        return Err(CalibError::Insufficient(format!(
            "degree {degree} needs >= {terms} samples, got {}",
            samples.len()
        )));
    }
    let proto = GravityModel::zero(degree);
    let mut design = DMatrix::<f64>::zeros(samples.len(), terms);
    for (r, s) in samples.iter().enumerate() {
        for (c, b) in proto.basis(s.uv[0], s.uv[1]).into_iter().enumerate() {
            design[(r, c)] = b;
        }
    }
    let svd = design.svd(true, true);
    if svd.singular_values.min() <= RANK_TOL * svd.singular_values.max() {
        return Err(CalibError::Degenerate(
            "orientation samples do not cover the parameter domain".into(),
        ));
    }
    let mut model = proto;
    for axis in 0..3 {
        let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.force[axis]));
        let sol = svd.solve(&rhs, 0.0).map_err(|e| CalibError::Degenerate(e.to_string()))?;
        model.coefficients[axis] = sol.iter().copied().collect();
    }
    model.fit_rmse = rms(samples.iter().map(|s| {
        let p = model.evaluate(s.uv[0], s.uv[1]);
        let d = [s.force[0] - p[0], s.force[1] - p[1], s.force[2] - p[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }));
    Ok(model)
}

/// Hand force = raw sensor force minus the modeled bias.
pub fn compensate(model: &GravityModel, uv: (f64, f64), raw_force: [f64; 3]) -> [f64; 3] {
    let bias = model.evaluate(uv.0, uv.1);
    [raw_force[0] - bias[0], raw_force[1] - bias[1], raw_force[2] - bias[2]]
}
