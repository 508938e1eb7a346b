//! The multiway Dirichlet generalized double Pareto prior on parafac margins.
//!
//! Hierarchy, for r = 1..R and j = 1..D:
//!
//! ```text
//! β_j^(r) ~ N(0, φ_r τ W_jr),   w_jr,k ~ Exp(λ_jr² / 2),   λ_jr ~ Ga(a_λ, b_λ)
//! Φ ~ Dirichlet(α, ..., α),      τ ~ Ga(a_τ, b_τ),           a_τ = R α
//! ```
//!
//! Gamma laws use the rate parameterization.

use crate::error::{domain, structural, Result};
use crate::random::{sample_dirichlet, sample_exponential, sample_gamma, RngStream, SCALE_FLOOR};
use crate::special::{ln_gamma, quantiles};
use crate::tensor::{ParafacFactors, TensorShape};

/// Hyperparameters for a prior of tensor order `order` and parafac rank `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdgdpHyper {
    pub order: usize,
    pub rank: usize,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub alpha_grid: Vec<f64>,
    pub v: f64,
}

impl MdgdpHyper {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.rank == 0 {
            return Err(structural("prior needs order ≥ 1 and rank ≥ 1"));
        }
        if !(self.a_lambda > 2.0) {
            return Err(domain(format!("a_lambda must exceed 2, got {}", self.a_lambda)));
        }
        if !(self.b_lambda > 0.0 && self.b_lambda.is_finite()) || !(self.v > 0.0 && self.v.is_finite()) {
            return Err(domain("b_lambda and v must be positive and finite"));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(domain(format!("alpha grid must be non-empty within (0, 1], got {:?}", self.alpha_grid)));
        }
        Ok(())
    }

    /// a_τ = R α, so that the Dirichlet and gamma pieces combine into independent giG scales.
    pub fn a_tau(&self, alpha: f64) -> f64 {
        self.rank as f64 * alpha
    }

    /// b_τ = α (R / v)^{1/D}.
    pub fn b_tau(&self, alpha: f64) -> f64 {
        alpha * (self.rank as f64 / self.v).powf(1.0 / self.order as f64)
    }
}

/// Defaults: a_λ = 3, b_λ = a_λ^{1/(2D)}, v = 1 and ten equally spaced α on [R^{-D}, R^{-0.1}].
pub fn default_hyper(order: usize, rank: usize) -> MdgdpHyper {
    let a_lambda = 3.0;
    let lo = (rank as f64).powf(-(order as f64));
    let hi = (rank as f64).powf(-0.1);
    let alpha_grid = if hi - lo <= 0.0 {
        vec![hi]
    } else {
        (0..10).map(|k| lo + (hi - lo) * k as f64 / 9.0).collect()
    };
    MdgdpHyper {
        order,
        rank,
        a_lambda,
        b_lambda: a_lambda.powf(1.0 / (2.0 * order as f64)),
        alpha_grid,
        v: 1.0,
    }
}

/// Latent prior scales. Per-(j, r) vectors are stored at index `r * D + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdgdpState {
    pub alpha: f64,
    pub phi: Vec<f64>,
    pub tau: f64,
    pub lambda: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl MdgdpState {
    pub fn rank(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self, shape: &TensorShape) -> Result<()> {
        let d = shape.order();
        let r = self.phi.len();
        if self.lambda.len() != r * d || self.w.len() != r * d {
            return Err(structural("prior state size does not match rank and order"));
        }
        if (self.phi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(domain("phi is not on the simplex"));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tau) || !self.phi.iter().all(|&v| positive(v)) || !self.lambda.iter().all(|&v| positive(v)) {
            return Err(domain("prior scales must be positive and finite"));
        }
        for (idx, w) in self.w.iter().enumerate() {
            if w.len() != shape.dims()[idx % d] || !w.iter().all(|&v| positive(v)) {
                return Err(domain(format!("local scales for (j={}, r={}) invalid", idx % d, idx / d)));
            }
        }
        Ok(())
    }
}

/// α uniform on the grid, then the rest of the hierarchy top down.
pub fn sample_prior_state(rng: &mut RngStream, hyper: &MdgdpHyper, shape: &TensorShape) -> Result<MdgdpState> {
    hyper.validate()?;
    let alpha = hyper.alpha_grid[rng.index(hyper.alpha_grid.len())];
    sample_prior_state_at(rng, hyper, shape, alpha)
}

/// Same as [`sample_prior_state`] with α held fixed.
pub fn sample_prior_state_at(rng: &mut RngStream, hyper: &MdgdpHyper, shape: &TensorShape, alpha: f64) -> Result<MdgdpState> {
    if shape.order() != hyper.order {
        return Err(structural(format!("prior built for order {} used with shape {:?}", hyper.order, shape.dims())));
    }
    let r = hyper.rank;
    let phi = if r == 1 { vec![1.0] } else { sample_dirichlet(rng, &vec![alpha; r])? };
    let tau = sample_gamma(rng, hyper.a_tau(alpha), hyper.b_tau(alpha))?;
    let mut lambda = Vec::with_capacity(r * hyper.order);
    let mut w = Vec::with_capacity(r * hyper.order);
    for _ in 0..r {
        for &p in shape.dims() {
            let l = sample_gamma(rng, hyper.a_lambda, hyper.b_lambda)?;
            let rate = l * l / 2.0;
            w.push((0..p).map(|_| sample_exponential(rng, rate)).collect::<Result<Vec<_>>>()?);
            lambda.push(l);
        }
    }
    Ok(MdgdpState { alpha, phi, tau, lambda, w })
}

/// β_{j,k}^(r) ~ N(0, φ_r τ w_{jr,k}); φ_r is floored at 1e-300.
pub fn sample_prior_margins(rng: &mut RngStream, state: &MdgdpState, shape: &TensorShape) -> Result<ParafacFactors> {
    let d = shape.order();
    let r = state.rank();
    if state.w.len() != r * d {
        return Err(structural("prior state does not match the tensor order"));
    }
    let margins = (0..r)
        .map(|rr| {
            let scale = state.phi[rr].max(SCALE_FLOOR) * state.tau;
            (0..d)
                .map(|j| state.w[rr * d + j].iter().map(|&w| (scale * w).sqrt() * rng.standard_normal()).collect())
                .collect()
        })
        .collect();
    ParafacFactors::new(shape.clone(), margins)
}

/// C_λ = b_λ² / ((a_λ - 1)(a_λ - 2)), the constant in the voxel variance bounds.
pub fn c_lambda(hyper: &MdgdpHyper) -> Result<f64> {
    if !(hyper.a_lambda > 2.0) {
        return Err(domain(format!("variance bounds need a_lambda > 2, got {}", hyper.a_lambda)));
    }
    Ok(hyper.b_lambda * hyper.b_lambda / ((hyper.a_lambda - 1.0) * (hyper.a_lambda - 2.0)))
}

/// Lower and upper bounds on the prior variance of a single voxel coefficient.
///
/// Stated for α = c/R with c a positive integer; other α > 0 are evaluated as is.
pub fn voxel_variance_bounds(hyper: &MdgdpHyper, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    let d = hyper.order as f64;
    let r = hyper.rank as f64;
    let base = (2.0 * c_lambda(hyper)? / hyper.b_tau(alpha)).powf(d);
    let lower = r * alpha.powf(d) * base;
    let a_const = ((d * d - 3.0 * d) / 2.0).exp();
    let upper = a_const * base * (alpha * r * d).exp();
    Ok((lower, upper))
}

/// Exact prior variance of a voxel coefficient, for reference.
///
/// var = E[τ^D] Σ_r E[φ_r^D] (E w)^D, where E w = E[2/λ²] = 2 C_λ.
pub fn voxel_variance_exact(hyper: &MdgdpHyper, alpha: f64) -> Result<f64> {
    let d = hyper.order as f64;
    let r = hyper.rank as f64;
    let a_tau = hyper.a_tau(alpha);
    let ln_tau_moment = ln_gamma(a_tau + d) - ln_gamma(a_tau) - d * hyper.b_tau(alpha).ln();
    let ln_phi_moment = ln_gamma(alpha + d) - ln_gamma(alpha) + ln_gamma(r * alpha) - ln_gamma(r * alpha + d);
    Ok(r * (ln_tau_moment + ln_phi_moment).exp() * (2.0 * c_lambda(hyper)?).powf(d))
}

/// Draws of the voxel coefficient B_{1,...,1} with every latent integrated out, α fixed.
pub fn sample_induced_voxel(rng: &mut RngStream, hyper: &MdgdpHyper, alpha: f64, n_samples: usize) -> Result<Vec<f64>> {
    hyper.validate()?;
    let (d, r) = (hyper.order, hyper.rank);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let phi = if r == 1 { vec![1.0] } else { sample_dirichlet(rng, &vec![alpha; r])? };
        let tau = sample_gamma(rng, hyper.a_tau(alpha), hyper.b_tau(alpha))?;
        let mut b = 0.0;
        for &phi_r in &phi {
            let mut prod = 1.0;
            for _ in 0..d {
                let l = sample_gamma(rng, hyper.a_lambda, hyper.b_lambda)?;
                let w = sample_exponential(rng, l * l / 2.0)?;
                prod *= (phi_r * tau * w).sqrt() * rng.standard_normal();
            }
            b += prod;
        }
        out.push(b);
    }
    Ok(out)
}

pub const TABLE_PROBS: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

/// Quantiles of |B| at one voxel under the prior with α = 1/R.
pub fn induced_prior_quantiles(rng: &mut RngStream, hyper: &MdgdpHyper, n_samples: usize) -> Result<[f64; 5]> {
    if n_samples < 100_000 {
        return Err(domain(format!("induced quantiles need at least 1e5 samples, got {n_samples}")));
    }
    let alpha = 1.0 / hyper.rank as f64;
    let abs: Vec<f64> = sample_induced_voxel(rng, hyper, alpha, n_samples)?.iter().map(|b| b.abs()).collect();
    let q = quantiles(&abs, &TABLE_PROBS)?;
    Ok([q[0], q[1], q[2], q[3], q[4]])
}
