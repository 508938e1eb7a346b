use nalgebra::DMatrix;

use crate::error::{domain, structural, Error, Result};
use crate::tensor::{DenseTensor, TensorShape};

/// Response, fixed-effect design and tensor covariates for n samples.
///
/// Tensor covariates are stored as one flat row of length Π p_j per sample,
/// in the tensor layout (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    shape: TensorShape,
    y: Vec<f64>,
    z: DMatrix<f64>,
    x: Vec<f64>,
    standardization: Option<Standardization>,
}

/// Location/scale record from [`standardize_data`]. A zero entry in `x_sd` or
/// `z_sd` marks a constant column that was set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub y_mean: f64,
    pub y_sd: f64,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub z_mean: Vec<f64>,
    pub z_sd: Vec<f64>,
}

impl Standardization {
    pub fn constant_voxels(&self) -> Vec<bool> {
        self.x_sd.iter().map(|&s| s == 0.0).collect()
    }

    /// Coefficient tensor on the scale of the raw data.
    pub fn tensor_to_original(&self, b: &[f64]) -> Vec<f64> {
        b.iter()
            .zip(&self.x_sd)
            .map(|(&v, &s)| if s == 0.0 { 0.0 } else { v * self.y_sd / s })
            .collect()
    }

    pub fn gamma_to_original(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .zip(&self.z_sd)
            .map(|(&v, &s)| if s == 0.0 { 0.0 } else { v * self.y_sd / s })
            .collect()
    }

    pub fn sigma2_to_original(&self, s2: f64) -> f64 {
        s2 * self.y_sd * self.y_sd
    }
}

impl RegressionData {
    /// `z` is n × q (q may be 0); `x` holds one tensor per sample.
    pub fn new(y: Vec<f64>, z: DMatrix<f64>, x: &[DenseTensor]) -> Result<Self> {
        let shape = x.first().ok_or_else(|| structural("at least one sample is required"))?.shape().clone();
        let mut flat = Vec::with_capacity(x.len() * shape.len());
        for (i, t) in x.iter().enumerate() {
            if t.shape() != &shape {
                return Err(structural(format!("sample {i} has shape {:?}, expected {:?}", t.shape().dims(), shape.dims())));
            }
            flat.extend_from_slice(t.values());
        }
        Self::from_flat(shape, y, z, flat)
    }

    pub fn from_flat(shape: TensorShape, y: Vec<f64>, z: DMatrix<f64>, x: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(structural("at least one sample is required"));
        }
        if z.nrows() != n {
            return Err(structural(format!("Z has {} rows for {n} responses", z.nrows())));
        }
        if x.len() != n * shape.len() {
            return Err(structural(format!("tensor block has {} values, expected {}", x.len(), n * shape.len())));
        }
        if y.iter().chain(z.iter()).chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(domain("non-finite value in regression data"));
        }
        Ok(Self { shape, y, z, x, standardization: None })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    /// Number of fixed-effect columns.
    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        let v = self.shape.len();
        &self.x[i * v..(i + 1) * v]
    }

    pub fn tensor(&self, i: usize) -> Result<DenseTensor> {
        DenseTensor::new(self.shape.clone(), self.x_row(i).to_vec())
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Same covariates with a new response (the standardization record is dropped).
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(structural(format!("{} responses for {} samples", y.len(), self.n())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(domain("non-finite response"));
        }
        Ok(Self { y, standardization: None, ..self.clone() })
    }

    /// Reorders tensor modes of every sample (see [`DenseTensor::permute_modes`]).
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let tensors = (0..self.n())
            .map(|i| self.tensor(i)?.permute_modes(perm))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.y.clone(), self.z.clone(), &tensors)?;
        out.standardization = self.standardization.clone();
        if let Some(s) = out.standardization.as_mut() {
            let permute = |v: &[f64]| -> Result<Vec<f64>> {
                Ok(DenseTensor::new(self.shape.clone(), v.to_vec())?.permute_modes(perm)?.into_values())
            };
            s.x_mean = permute(&s.x_mean)?;
            s.x_sd = permute(&s.x_sd)?;
        }
        Ok(out)
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss = values.map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Centers and scales y, every voxel and every Z column (sd with n − 1).
///
/// The intercept is absorbed by centering. Constant voxels and Z columns become 0
/// and are flagged with sd = 0 in the record.
pub fn standardize_data(raw: &RegressionData) -> Result<RegressionData> {
    let n = raw.n();
    if n < 2 {
        return Err(domain("standardization needs at least two samples"));
    }
    let (y_mean, y_sd) = mean_sd(raw.y.iter().cloned(), n);
    if !(y_sd > 0.0) {
        return Err(Error::Domain("response has zero variance".into()));
    }
    let y = raw.y.iter().map(|v| (v - y_mean) / y_sd).collect();

    let nv = raw.shape.len();
    let mut x_mean = vec![0.0; nv];
    let mut x_sd = vec![0.0; nv];
    for i in 0..n {
        for (m, v) in x_mean.iter_mut().zip(raw.x_row(i)) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        for ((s, v), m) in x_sd.iter_mut().zip(raw.x_row(i)).zip(&x_mean) {
            *s += (v - m) * (v - m);
        }
    }
    for (s, m) in x_sd.iter_mut().zip(&x_mean) {
        *s = (*s / (n - 1) as f64).sqrt();
        // treat round-off spread of a constant column as constant
        if *s <= 1e-14 * m.abs().max(1.0) {
            *s = 0.0;
        }
    }
    let mut x = raw.x.clone();
    for row in x.chunks_mut(nv) {
        for ((v, m), s) in row.iter_mut().zip(&x_mean).zip(&x_sd) {
            *v = if *s == 0.0 { 0.0 } else { (*v - m) / s };
        }
    }

    let q = raw.q();
    let mut z = raw.z.clone();
    let mut z_mean = vec![0.0; q];
    let mut z_sd = vec![0.0; q];
    for c in 0..q {
        let col = raw.z.column(c);
        let (m, mut s) = mean_sd(col.iter().cloned(), n);
        if s <= 1e-14 * m.abs().max(1.0) {
            s = 0.0;
        }
        for i in 0..n {
            z[(i, c)] = if s == 0.0 { 0.0 } else { (raw.z[(i, c)] - m) / s };
        }
        z_mean[c] = m;
        z_sd[c] = s;
    }

    Ok(RegressionData {
        shape: raw.shape.clone(),
        y,
        z,
        x,
        standardization: Some(Standardization { y_mean, y_sd, x_mean, x_sd, z_mean, z_sd }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(y: Vec<f64>, x: Vec<f64>, dims: &[usize]) -> RegressionData {
        let n = y.len();
        RegressionData::from_flat(TensorShape::new(dims.to_vec()).unwrap(), y, DMatrix::zeros(n, 0), x).unwrap()
    }

    #[test]
    fn two_point_response() {
        let d = data(vec![1.0, 3.0], vec![0.0, 1.0], &[1]);
        let s = standardize_data(&d).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.y()[0] + h).abs() < 1e-15 && (s.y()[1] - h).abs() < 1e-15);
    }

    #[test]
    fn idempotent_on_standardized_input() {
        let raw = data(vec![1.0, 4.0, 2.0, 7.0], vec![1.0, 0.0, 3.0, 1.0, 2.0, 5.0, 0.5, 0.0], &[2]);
        let once = standardize_data(&raw).unwrap();
        let twice = standardize_data(&once).unwrap();
        for (a, b) in once.y().iter().zip(twice.y()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in once.x_flat().iter().zip(twice.x_flat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_voxel_flagged() {
        let raw = data(vec![1.0, 2.0, 4.0], vec![5.0, 1.0, 5.0, 2.0, 5.0, 0.0], &[2]);
        let s = standardize_data(&raw).unwrap();
        let rec = s.standardization().unwrap();
        assert_eq!(rec.constant_voxels(), vec![true, false]);
        assert!(s.x_flat().iter().step_by(2).all(|&v| v == 0.0));
        assert_eq!(rec.tensor_to_original(&[3.0, 1.0])[0], 0.0);
    }

    #[test]
    fn constant_response_rejected() {
        let raw = data(vec![2.0, 2.0], vec![0.0, 1.0], &[1]);
        assert!(matches!(standardize_data(&raw), Err(Error::Domain(_))));
    }

    #[test]
    fn voxel_columns_have_unit_sd() {
        let x: Vec<f64> = (0..30).map(|k| ((k * 7919) % 13) as f64).collect();
        let raw = data((0..10).map(|k| k as f64).collect(), x, &[3]);
        let s = standardize_data(&raw).unwrap();
        for v in 0..3 {
            let col: Vec<f64> = (0..10).map(|i| s.x_row(i)[v]).collect();
            let (m, sd) = mean_sd(col.iter().cloned(), 10);
            assert!(m.abs() < 1e-14 && (sd - 1.0).abs() < 1e-14);
        }
    }
}
