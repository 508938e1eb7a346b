//! Seeded random streams and the variate generators used by the prior and sampler.
//!
//! Gamma-type draws that feed a normalization (Dirichlet, normalized giG) are made
//! in log space, since concentrations like 0.001 routinely underflow a direct draw.

mod gig;

pub use gig::{gig_mean, sample_gig, sample_ln_gig, GigParams};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{domain, numerical, Result};

/// Smallest scale allowed for a normalized component.
pub const SCALE_FLOOR: f64 = 1e-300;

/// A deterministic, seedable random stream (ChaCha8 core).
///
/// Independent streams for parallel work are derived with [`RngStream::substream`],
/// which mixes the seed with a label and an index through a fixed hash, so the
/// derived seeds do not depend on the platform or the standard library version.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A child stream identified by `(label, index)`. Does not advance `self`.
    pub fn substream(&self, label: &str, index: u64) -> RngStream {
        let mut h = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c909);
        h = splitmix64(h ^ fnv1a(label.as_bytes()));
        h = splitmix64(h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        RngStream::new(h)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on (0, 1], safe to take the log of.
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Integer uniform on `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Gamma(shape, rate) draw.
pub fn sample_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    if shape < 1.0 {
        return Ok(sample_ln_gamma(rng, shape, rate)?.exp());
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| domain(e.to_string()))?;
    Ok(g.sample(rng) / rate)
}

/// log of a Gamma(shape, rate) draw, accurate for tiny shapes.
///
/// Uses G(s) = G(s + 1) U^{1/s} when s < 1.
pub fn sample_ln_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).map_err(|e| domain(e.to_string()))?;
        return Ok(g.sample(rng).ln() - rate.ln());
    }
    let g = Gamma::new(shape + 1.0, 1.0).map_err(|e| domain(e.to_string()))?;
    let boost = rng.uniform_pos().ln() / shape;
    Ok(g.sample(rng).ln() + boost - rate.ln())
}

/// Inverse gamma with density ∝ x^{-shape-1} exp(-scale/x).
pub fn sample_inverse_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> Result<f64> {
    check_positive("inverse gamma scale", scale)?;
    Ok((scale.ln() - sample_ln_gamma(rng, shape, 1.0)?).exp())
}

pub fn sample_exponential(rng: &mut RngStream, rate: f64) -> Result<f64> {
    check_positive("exponential rate", rate)?;
    Ok(-rng.uniform_pos().ln() / rate)
}

pub fn sample_normal(rng: &mut RngStream, mean: f64, sd: f64) -> f64 {
    mean + sd * rng.standard_normal()
}

/// Maps log-weights to a simplex point, flooring components at [`SCALE_FLOOR`].
fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let lse = crate::special::log_sum_exp(logs);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - lse).exp().max(SCALE_FLOOR)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

pub fn sample_dirichlet(rng: &mut RngStream, concentrations: &[f64]) -> Result<Vec<f64>> {
    if concentrations.is_empty() {
        return Err(domain("Dirichlet needs at least one concentration"));
    }
    let logs = concentrations
        .iter()
        .map(|&c| sample_ln_gamma(rng, c, 1.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(normalize_logs(&logs))
}

/// Draws T_r ~ giG(p_r, a_r, b_r) independently and returns (T / ΣT, ln ΣT).
///
/// `b_r` below [`SCALE_FLOOR`] is raised to it.
pub fn sample_normalized_gig_with_total(rng: &mut RngStream, params: &[GigParams]) -> Result<(Vec<f64>, f64)> {
    if params.is_empty() {
        return Err(domain("normalized giG needs at least one component"));
    }
    let logs = params
        .iter()
        .map(|g| {
            let clamped = GigParams { b: if g.b < SCALE_FLOOR && g.p <= 0.0 { SCALE_FLOOR } else { g.b }, ..*g };
            sample_ln_gig(rng, &clamped)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = crate::special::log_sum_exp(&logs);
    Ok((normalize_logs(&logs), total))
}

pub fn sample_normalized_gig(rng: &mut RngStream, params: &[GigParams]) -> Result<Vec<f64>> {
    Ok(sample_normalized_gig_with_total(rng, params)?.0)
}

/// Draws x ~ N(Q⁻¹ l, Q⁻¹) for a symmetric positive definite precision Q.
///
/// Q = LLᵀ; the mean solves two triangular systems and the noise is L⁻ᵀ z.
pub fn sample_mvn_precision_form(rng: &mut RngStream, precision: &DMatrix<f64>, linear: &DVector<f64>) -> Result<DVector<f64>> {
    let n = precision.nrows();
    if precision.ncols() != n || linear.len() != n {
        return Err(crate::error::structural(format!(
            "precision {}x{} with linear term of length {}",
            precision.nrows(),
            precision.ncols(),
            linear.len()
        )));
    }
    let chol = precision.clone().cholesky().ok_or_else(|| {
        let min_diag = precision.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
        numerical(format!("precision matrix of size {n} is not positive definite (min diagonal {min_diag:e})"))
    })?;
    let l = chol.l_dirty();
    let mut mean = linear.clone();
    l.solve_lower_triangular_mut(&mut mean);
    let z = DVector::from_fn(n, |_, _| rng.standard_normal());
    // Lᵀ x = L⁻¹ l + z gives mean Q⁻¹ l and covariance Q⁻¹
    let mut x = mean + z;
    l.tr_solve_lower_triangular_mut(&mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(numerical("non-finite Gaussian draw"));
    }
    Ok(x)
}
