//! L1-penalized least squares on [Z, vec(X)].
//!
//! Minimizes (1/2n)‖y − Xb‖² + λ‖b‖₁ over all coefficients (fixed effects
//! included) by cyclic coordinate descent. No intercept is fitted; the data are
//! expected to be centered, as [`standardize_data`](crate::sampler::standardize_data)
//! leaves them. λ is chosen by k-fold cross-validation over a log-spaced grid,
//! with observation i in fold i mod k.

use crate::error::{domain, structural, Result};
use crate::sampler::RegressionData;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub lambda_min_ratio: f64,
    pub folds: usize,
    /// Stop when the relative objective change over a sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { n_lambda: 20, lambda_min_ratio: 1e-3, folds: 5, tol: 1e-7, max_sweeps: 1000 }
    }
}

/// Column-major n × P design.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    cols: Vec<f64>,
}

impl Design {
    pub fn new(n: usize, p: usize, cols: Vec<f64>) -> Result<Self> {
        if cols.len() != n * p {
            return Err(structural(format!("design has {} values, expected {n}×{p}", cols.len())));
        }
        if cols.iter().any(|v| !v.is_finite()) {
            return Err(domain("non-finite value in the design"));
        }
        Ok(Self { n, p, cols })
    }

    /// Columns [Z, vec(X)] of a regression dataset.
    pub fn from_data(data: &RegressionData) -> Self {
        let (n, q, nv) = (data.n(), data.q(), data.shape().len());
        let mut cols = vec![0.0; n * (q + nv)];
        for k in 0..q {
            for i in 0..n {
                cols[k * n + i] = data.z()[(i, k)];
            }
        }
        for i in 0..n {
            for (v, &x) in data.x_row(i).iter().enumerate() {
                cols[(q + v) * n + i] = x;
            }
        }
        Self { n, p: q + nv, cols }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn predict(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                for (o, x) in out.iter_mut().zip(self.column(j)) {
                    *o += bj * x;
                }
            }
        }
        out
    }

    fn rows(&self, keep: &[usize]) -> Design {
        let mut cols = Vec::with_capacity(keep.len() * self.p);
        for j in 0..self.p {
            let c = self.column(j);
            cols.extend(keep.iter().map(|&i| c[i]));
        }
        Design { n: keep.len(), p: self.p, cols }
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn objective(design: &Design, y: &[f64], b: &[f64], lambda: f64) -> f64 {
    let fit = design.predict(b);
    let rss: f64 = y.iter().zip(&fit).map(|(a, f)| (a - f) * (a - f)).sum();
    rss / (2.0 * design.n as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Gradient of the smooth part, −X'(y − Xb)/n.
pub fn gradient(design: &Design, y: &[f64], b: &[f64]) -> Vec<f64> {
    let fit = design.predict(b);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, f)| a - f).collect();
    (0..design.p).map(|j| -dot(design.column(j), &r) / design.n as f64).collect()
}

/// Coordinate descent from `b`, updated in place. Returns the objective after each sweep.
pub fn coordinate_descent(design: &Design, y: &[f64], lambda: f64, b: &mut [f64], opts: &LassoOptions) -> Result<Vec<f64>> {
    if y.len() != design.n || b.len() != design.p {
        return Err(structural("response or coefficients do not match the design"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(domain(format!("penalty must be finite and non-negative, got {lambda}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(domain("non-finite response"));
    }
    let n = design.n as f64;
    let scale: Vec<f64> = (0..design.p).map(|j| dot(design.column(j), design.column(j)) / n).collect();
    let fit = design.predict(b);
    let mut r: Vec<f64> = y.iter().zip(&fit).map(|(a, f)| a - f).collect();
    let mut trace = Vec::new();
    let mut prev = objective(design, y, b, lambda);
    for _ in 0..opts.max_sweeps {
        for j in 0..design.p {
            if scale[j] == 0.0 {
                b[j] = 0.0;
                continue;
            }
            let col = design.column(j);
            let old = b[j];
            let rho = dot(col, &r) / n + scale[j] * old;
            let new = soft_threshold(rho, lambda) / scale[j];
            if new != old {
                let d = new - old;
                for (ri, x) in r.iter_mut().zip(col) {
                    *ri -= d * x;
                }
                b[j] = new;
            }
        }
        let rss: f64 = r.iter().map(|v| v * v).sum();
        let obj = rss / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>();
        trace.push(obj);
        if (prev - obj).abs() <= opts.tol * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    Ok(trace)
}

/// Smallest penalty with an all-zero solution, max_j |x_j'y| / n.
pub fn lambda_max(design: &Design, y: &[f64]) -> f64 {
    (0..design.p).map(|j| dot(design.column(j), y).abs()).fold(0.0, f64::max) / design.n as f64
}

/// `count` values log-spaced from `max` down to `max * min_ratio`.
pub fn lambda_grid(max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![max];
    }
    (0..count)
        .map(|k| max * min_ratio.powf(k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// [γ; vec(B)] on the scale of the data the fit was run on.
    pub coefficients: Vec<f64>,
    pub q: usize,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    /// Mean held-out squared error per grid value (empty for a fixed-λ fit).
    pub cv_error: Vec<f64>,
    /// Objective after each sweep of the final fit.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn gamma(&self) -> &[f64] {
        &self.coefficients[..self.q]
    }

    pub fn tensor_coefficients(&self) -> &[f64] {
        &self.coefficients[self.q..]
    }

    /// Tensor estimate on the raw-data scale when `data` carries a standardization record.
    pub fn tensor_estimate(&self, data: &RegressionData) -> Result<DenseTensor> {
        let b = self.tensor_coefficients();
        let values = match data.standardization() {
            Some(s) => s.tensor_to_original(b),
            None => b.to_vec(),
        };
        DenseTensor::new(data.shape().clone(), values)
    }
}

pub fn lasso_fit_fixed(data: &RegressionData, lambda: f64, opts: &LassoOptions) -> Result<LassoFit> {
    let design = Design::from_data(data);
    let mut b = vec![0.0; design.p];
    let trace = coordinate_descent(&design, data.y(), lambda, &mut b, opts)?;
    Ok(LassoFit {
        coefficients: b,
        q: data.q(),
        lambda,
        lambda_grid: vec![lambda],
        cv_error: Vec::new(),
        objective_trace: trace,
    })
}

/// Cross-validated fit. `grid` defaults to [`lambda_grid`] from λ_max.
pub fn lasso_fit(data: &RegressionData, grid: Option<&[f64]>, opts: &LassoOptions) -> Result<LassoFit> {
    let design = Design::from_data(data);
    let y = data.y();
    let n = design.n;
    if opts.folds < 2 || opts.folds > n {
        return Err(domain(format!("fold count {} must lie in 2..={n}", opts.folds)));
    }
    let mut grid: Vec<f64> = match grid {
        Some(g) if !g.is_empty() => g.to_vec(),
        Some(_) => return Err(domain("empty penalty grid")),
        None => lambda_grid(lambda_max(&design, y), opts.n_lambda, opts.lambda_min_ratio),
    };
    grid.sort_by(|a, b| b.total_cmp(a));

    let mut cv_error = vec![0.0; grid.len()];
    for fold in 0..opts.folds {
        let train: Vec<usize> = (0..n).filter(|i| i % opts.folds != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % opts.folds == fold).collect();
        let d_train = design.rows(&train);
        let d_test = design.rows(&test);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let mut b = vec![0.0; design.p];
        for (k, &lam) in grid.iter().enumerate() {
            coordinate_descent(&d_train, &y_train, lam, &mut b, opts)?;
            let pred = d_test.predict(&b);
            let sse: f64 = y_test.iter().zip(&pred).map(|(a, p)| (a - p) * (a - p)).sum();
            cv_error[k] += sse / n as f64;
        }
    }
    let best = (0..grid.len()).min_by(|&a, &b| cv_error[a].total_cmp(&cv_error[b])).expect("grid is non-empty");

    let mut b = vec![0.0; design.p];
    let mut trace = Vec::new();
    for &lam in &grid[..=best] {
        trace = coordinate_descent(&design, y, lam, &mut b, opts)?;
    }
    log::debug!("lasso: chose lambda {} ({} of {})", grid[best], best + 1, grid.len());
    Ok(LassoFit {
        coefficients: b,
        q: data.q(),
        lambda: grid[best],
        lambda_grid: grid,
        cv_error,
        objective_trace: trace,
    })
}

/// Linear predictor z'γ + ⟨X, B⟩ for every sample of `data`.
pub fn predict(fit: &LassoFit, data: &RegressionData) -> Result<Vec<f64>> {
    if fit.q != data.q() || fit.coefficients.len() != data.q() + data.shape().len() {
        return Err(structural("fit does not match the data dimensions"));
    }
    Ok((0..data.n())
        .map(|i| {
            let z: f64 = (0..fit.q).map(|k| data.z()[(i, k)] * fit.coefficients[k]).sum();
            z + dot(data.x_row(i), fit.tensor_coefficients())
        })
        .collect())
}
