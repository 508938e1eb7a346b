use crate::error::{domain, structural, Result};
use crate::special::quantile_sorted;
use crate::tensor::{DenseTensor, TensorShape};

/// Retained draws, one row per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub shape: TensorShape,
    pub q: usize,
    pub rank: usize,
    /// vec(B) per draw, row-major (draw × voxel).
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Draws {
    pub fn new(shape: TensorShape, q: usize, rank: usize, capacity: usize) -> Self {
        Self {
            b: Vec::with_capacity(capacity * shape.len()),
            gamma: Vec::with_capacity(capacity * q),
            sigma2: Vec::with_capacity(capacity),
            alpha: Vec::with_capacity(capacity),
            tau: Vec::with_capacity(capacity),
            phi: Vec::with_capacity(capacity * rank),
            shape,
            q,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn push(&mut self, b: &[f64], gamma: &[f64], sigma2: f64, alpha: f64, tau: f64, phi: &[f64]) -> Result<()> {
        if b.len() != self.shape.len() || gamma.len() != self.q || phi.len() != self.rank {
            return Err(structural("draw does not match the chain dimensions"));
        }
        self.b.extend_from_slice(b);
        self.gamma.extend_from_slice(gamma);
        self.sigma2.push(sigma2);
        self.alpha.push(alpha);
        self.tau.push(tau);
        self.phi.extend_from_slice(phi);
        Ok(())
    }

    /// Trace of one voxel across draws.
    pub fn voxel_trace(&self, v: usize) -> Vec<f64> {
        let nv = self.shape.len();
        (0..self.len()).map(|t| self.b[t * nv + v]).collect()
    }

    pub fn gamma_trace(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.gamma[t * self.q + k]).collect()
    }

    /// Posterior mean of the component scale φ_r τ for every r.
    pub fn mean_component_scales(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.rank)
            .map(|r| (0..self.len()).map(|t| self.phi[t * self.rank + r] * self.tau[t]).sum::<f64>() / n)
            .collect()
    }
}

/// Effective sample sizes per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSizes {
    pub sigma2: f64,
    pub tau: f64,
    pub alpha: f64,
    /// Median over voxels.
    pub b_median: f64,
    /// Minimum over fixed-effect components (absent when there are none).
    pub gamma_min: Option<f64>,
}

/// Summary of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorOutput {
    pub draws: Draws,
    /// Average of the per-draw assembled tensors.
    pub mean: DenseTensor,
    /// Equal-tailed 95% interval bounds per voxel.
    pub lower: DenseTensor,
    pub upper: DenseTensor,
    pub gamma_mean: Vec<f64>,
    pub sigma2_mean: f64,
    pub ess: EffectiveSizes,
}

/// Pointwise mean and 2.5% / 97.5% quantiles of tensor draws (row-major draw × voxel).
pub fn summarize_tensor_draws(shape: &TensorShape, b: &[f64], n_draws: usize) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    if n_draws == 0 {
        return Err(domain("cannot summarize an empty chain"));
    }
    let nv = shape.len();
    if b.len() != nv * n_draws {
        return Err(structural("draw block does not match shape and draw count"));
    }
    let mut mean = vec![0.0; nv];
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    let mut col = vec![0.0; n_draws];
    for v in 0..nv {
        for (t, c) in col.iter_mut().enumerate() {
            *c = b[t * nv + v];
        }
        mean[v] = col.iter().sum::<f64>() / n_draws as f64;
        col.sort_by(f64::total_cmp);
        lower[v] = quantile_sorted(&col, 0.025);
        upper[v] = quantile_sorted(&col, 0.975);
    }
    Ok((
        DenseTensor::new(shape.clone(), mean)?,
        DenseTensor::new(shape.clone(), lower)?,
        DenseTensor::new(shape.clone(), upper)?,
    ))
}

pub fn summarize(draws: Draws) -> Result<PosteriorOutput> {
    let n = draws.len();
    let (mean, lower, upper) = summarize_tensor_draws(&draws.shape, &draws.b, n)?;
    let gamma_mean = (0..draws.q).map(|k| draws.gamma_trace(k).iter().sum::<f64>() / n as f64).collect();
    let sigma2_mean = draws.sigma2.iter().sum::<f64>() / n as f64;
    let mut b_ess: Vec<f64> = (0..draws.shape.len()).map(|v| effective_sample_size(&draws.voxel_trace(v))).collect();
    b_ess.sort_by(f64::total_cmp);
    let ess = EffectiveSizes {
        sigma2: effective_sample_size(&draws.sigma2),
        tau: effective_sample_size(&draws.tau),
        alpha: effective_sample_size(&draws.alpha),
        b_median: quantile_sorted(&b_ess, 0.5),
        gamma_min: (0..draws.q).map(|k| effective_sample_size(&draws.gamma_trace(k))).reduce(f64::min),
    };
    Ok(PosteriorOutput { draws, mean, lower, upper, gamma_mean, sigma2_mean, ess })
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
///
/// A constant trace returns its length.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let acov = |lag: usize| (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64;
    let g0 = acov(0);
    if !(g0 > 0.0) {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = acov(2 * k) + acov(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum / g0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10().max(1.0))
}
