use nalgebra::{DMatrix, DVector};

use super::data::{standardize_data, RegressionData};
use super::summary::{summarize, Draws, PosteriorOutput};
use crate::error::{domain, structural, Error, Result};
use crate::prior::{sample_prior_margins, sample_prior_state, sample_prior_state_at, MdgdpHyper, MdgdpState};
use crate::random::{
    sample_gamma, sample_gig, sample_inverse_gamma, sample_ln_gamma, sample_mvn_precision_form,
    sample_normalized_gig, GigParams, RngStream, SCALE_FLOOR,
};
use crate::special::{ln_bessel_k, ln_gamma, log_mean_exp};
use crate::tensor::{contract_into, contraction_weights, dot, ParafacFactors};

/// Largest prior precision placed on a margin coordinate.
const PRECISION_CAP: f64 = 1e300;

/// How the discrete conditional of α is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GriddyMode {
    /// Average the margin likelihood over M prior draws of (Φ, τ) per grid value.
    /// Cheap, but the noisy weights bias the stationary law slightly.
    MonteCarlo,
    /// Integrate (Φ, τ) out in closed form (a product of Bessel-K terms).
    Exact,
}

/// Inverse-gamma prior IG(v/2, v s0²/2) on σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePrior {
    pub v: f64,
    pub s0sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub rank: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// M, the number of prior draws per grid value in Monte Carlo griddy-Gibbs.
    pub griddy_samples: usize,
    pub griddy_mode: GriddyMode,
    pub seed: u64,
    /// Scale tuning v in b_τ = α (R/v)^{1/D}.
    pub v: f64,
    /// Σ_0γ = c I; the fixed-effect prior is γ ~ N(0, σ² Σ_0γ).
    pub gamma_prior_variance: f64,
    pub noise_v: f64,
    /// s0²; `None` calibrates it so that Pr(σ² ≤ 1) = `noise_target`.
    pub noise_s0sq: Option<f64>,
    pub noise_target: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            iterations: 1000,
            burn_in: 200,
            thin: 5,
            griddy_samples: 10,
            griddy_mode: GriddyMode::Exact,
            seed: 0,
            v: 1.0,
            gamma_prior_variance: 1.0,
            noise_v: 2.0,
            noise_s0sq: None,
            noise_target: 0.95,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(domain("rank must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(domain(format!("burn-in {} must be below iterations {}", self.burn_in, self.iterations)));
        }
        if self.thin == 0 || self.griddy_samples == 0 {
            return Err(domain("thinning and griddy sample count must be at least 1"));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.v) || !pos(self.gamma_prior_variance) || !pos(self.noise_v) {
            return Err(domain("v, gamma prior variance and noise v must be positive"));
        }
        if let Some(s) = self.noise_s0sq {
            if !pos(s) {
                return Err(domain(format!("s0² must be positive, got {s}")));
            }
        }
        if !(self.noise_target > 0.0 && self.noise_target < 1.0) {
            return Err(domain("noise calibration target must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Default hyperparameters for tensor order `order`, with this config's rank and v.
    pub fn hyper(&self, order: usize) -> MdgdpHyper {
        let mut h = crate::prior::default_hyper(order, self.rank);
        h.v = self.v;
        h
    }

    pub fn noise_prior(&self) -> Result<NoisePrior> {
        let s0sq = match self.noise_s0sq {
            Some(s) => s,
            None => calibrate_noise_prior(self.noise_v, self.noise_target)?,
        };
        Ok(NoisePrior { v: self.noise_v, s0sq })
    }

    pub fn retained_draws(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// s0² such that Pr(σ² ≤ 1) = target under σ² ~ IG(v/2, v s0²/2).
///
/// Pr(σ² ≤ 1) = Pr(1/σ² ≥ 1) = Q(v/2, v s0²/2), the regularized upper incomplete
/// gamma function, which decreases in s0²; solved by bisection on ln s0².
pub fn calibrate_noise_prior(v: f64, target: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) || !(target > 0.0 && target < 1.0) {
        return Err(domain(format!("calibration needs v > 0 and target in (0, 1), got v={v}, target={target}")));
    }
    let prob = |ln_s: f64| statrs::function::gamma::gamma_ur(v / 2.0, v * ln_s.exp() / 2.0);
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prob(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// One state of the Gibbs chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub factors: ParafacFactors,
    pub prior: MdgdpState,
    pub gamma: Vec<f64>,
    pub sigma2: f64,
}

impl ChainState {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) || self.gamma.iter().any(|v| !v.is_finite()) {
            return Err(domain("σ² must be positive and γ finite"));
        }
        self.prior.validate(self.factors.shape())
    }
}

/// Cached per-component fits ⟨X_i, B_r⟩ and fixed-effect fits z_i'γ.
#[derive(Debug, Clone)]
pub struct FitCache {
    comp: Vec<Vec<f64>>,
    zgamma: Vec<f64>,
    coords: Vec<Vec<usize>>,
}

impl FitCache {
    pub fn new(data: &RegressionData, state: &ChainState) -> Result<Self> {
        if data.shape() != state.factors.shape() {
            return Err(structural("chain state shape differs from the data"));
        }
        if data.q() != state.gamma.len() {
            return Err(structural(format!("γ has length {}, Z has {} columns", state.gamma.len(), data.q())));
        }
        let comp = (0..state.factors.rank())
            .map(|r| {
                let b = state.factors.component_values(r);
                (0..data.n()).map(|i| dot(data.x_row(i), &b)).collect()
            })
            .collect();
        let coords = (0..data.shape().order()).map(|j| data.shape().mode_coordinates(j)).collect();
        Ok(Self { comp, zgamma: z_times(data, &state.gamma), coords })
    }

    fn tensor_fit(&self, i: usize) -> f64 {
        self.comp.iter().map(|c| c[i]).sum()
    }

    /// Residual y − Zγ − Σ_{l≠skip} ⟨X, B_l⟩; `skip = None` removes every component.
    pub fn residual(&self, data: &RegressionData, skip: Option<usize>) -> Vec<f64> {
        (0..data.n())
            .map(|i| {
                let own = skip.map_or(0.0, |r| self.comp[r][i]);
                data.y()[i] - self.zgamma[i] - (self.tensor_fit(i) - own)
            })
            .collect()
    }

    /// Largest absolute gap between the cached and a freshly computed full residual.
    pub fn residual_drift(&self, data: &RegressionData, state: &ChainState) -> Result<f64> {
        let fresh = FitCache::new(data, state)?;
        let a = self.residual(data, None);
        let b = fresh.residual(data, None);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }
}

fn z_times(data: &RegressionData, gamma: &[f64]) -> Vec<f64> {
    if gamma.is_empty() {
        return vec![0.0; data.n()];
    }
    (data.z() * DVector::from_column_slice(gamma)).iter().cloned().collect()
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
        Error::Structural(m) => Error::Structural(format!("{ctx}: {m}")),
        other => other,
    }
}

/// Q_r = Σ_j β_j^(r)' W_jr^{-1} β_j^(r).
pub fn component_quadratic_forms(factors: &ParafacFactors, prior: &MdgdpState) -> Vec<f64> {
    let d = factors.shape().order();
    (0..factors.rank())
        .map(|r| {
            (0..d)
                .map(|j| factors.margin(j, r).iter().zip(&prior.w[r * d + j]).map(|(b, w)| b * b / w).sum::<f64>())
                .sum()
        })
        .collect()
}

/// ln ∫ T^{-p0/2} exp(-Q / 2T) Ga(T; α, b_τ) dT.
fn ln_component_marginal(alpha: f64, b_tau: f64, p0: f64, q: f64) -> Result<f64> {
    let q = q.max(SCALE_FLOOR);
    let nu = alpha - p0 / 2.0;
    Ok(alpha * b_tau.ln() - ln_gamma(alpha)
        + std::f64::consts::LN_2
        + 0.5 * nu * (q / (2.0 * b_tau)).ln()
        + ln_bessel_k(nu, (2.0 * b_tau * q).sqrt())?)
}

/// Unnormalized log weights of the grid values of α given B and W.
pub fn alpha_log_weights(
    rng: &mut RngStream,
    hyper: &MdgdpHyper,
    quad: &[f64],
    p0: f64,
    mode: GriddyMode,
    m: usize,
) -> Result<Vec<f64>> {
    hyper
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let b_tau = hyper.b_tau(alpha);
            match mode {
                GriddyMode::Exact => quad.iter().map(|&q| ln_component_marginal(alpha, b_tau, p0, q)).sum(),
                GriddyMode::MonteCarlo => {
                    // with a_τ = Rα the products T_r = φ_r τ are iid Ga(α, b_τ)
                    let mut lls = Vec::with_capacity(m);
                    for _ in 0..m {
                        let mut ll = 0.0;
                        for &q in quad {
                            let ln_t = sample_ln_gamma(rng, alpha, b_tau)?;
                            ll += -0.5 * p0 * ln_t - 0.5 * q * (-ln_t).exp();
                        }
                        lls.push(ll);
                    }
                    Ok(log_mean_exp(&lls))
                }
            }
        })
        .collect()
}

/// Step 1: α by griddy-Gibbs, then Φ by normalized giG and τ | Φ by giG.
///
/// Returns the discrete conditional probabilities used for α.
pub fn step_alpha_phi_tau(
    rng: &mut RngStream,
    state: &mut ChainState,
    hyper: &MdgdpHyper,
    mode: GriddyMode,
    m: usize,
) -> Result<Vec<f64>> {
    let shape = state.factors.shape().clone();
    let p0 = shape.margin_total() as f64;
    let rank = state.factors.rank();
    let quad = component_quadratic_forms(&state.factors, &state.prior);

    let probs = if hyper.alpha_grid.len() == 1 {
        vec![1.0]
    } else {
        let lw = alpha_log_weights(rng, hyper, &quad, p0, mode, m)?;
        let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = lw.iter().map(|&l| (l - top).exp()).collect();
        let total: f64 = probs.iter().sum();
        if !(top.is_finite() && total.is_finite() && total > 0.0) {
            log::warn!("griddy-Gibbs weights underflowed; drawing α uniformly");
            probs = vec![1.0; lw.len()];
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        probs
    };
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = k;
            break;
        }
    }
    let alpha = hyper.alpha_grid[pick];
    let b_tau = hyper.b_tau(alpha);

    let params = quad
        .iter()
        .map(|&q| GigParams::new(alpha - p0 / 2.0, 2.0 * b_tau, q.max(SCALE_FLOOR)))
        .collect::<Result<Vec<_>>>()?;
    let phi = sample_normalized_gig(rng, &params)?;
    let d_sum: f64 = quad.iter().zip(&phi).map(|(q, f)| q / f).sum();
    let tau_params = GigParams::new(
        hyper.a_tau(alpha) - rank as f64 * p0 / 2.0,
        2.0 * b_tau,
        d_sum.max(SCALE_FLOOR),
    )?;
    let tau = sample_gig(rng, &tau_params)?;

    state.prior.alpha = alpha;
    state.prior.phi = phi;
    state.prior.tau = tau;
    Ok(probs)
}

/// Step 2 for one (j, r): λ_jr, then w_jr, then β_j^(r), updating the fit cache.
#[allow(clippy::too_many_arguments)]
pub fn update_margin(
    rng: &mut RngStream,
    state: &mut ChainState,
    data: &RegressionData,
    hyper: &MdgdpHyper,
    cache: &mut FitCache,
    j: usize,
    r: usize,
) -> Result<()> {
    let d = state.factors.shape().order();
    let p = state.factors.shape().dims()[j];
    let n = data.n();
    let scale = state.prior.phi[r].max(SCALE_FLOOR) * state.prior.tau;
    let idx = r * d + j;

    let beta = state.factors.margin(j, r).to_vec();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lambda = sample_gamma(rng, hyper.a_lambda + p as f64, hyper.b_lambda + l1 / scale.sqrt())?;
    let w = beta
        .iter()
        .map(|&b| {
            let bb = (b * b / scale).max(SCALE_FLOOR);
            sample_gig(rng, &GigParams { p: 0.5, a: lambda * lambda, b: bb })
        })
        .collect::<Result<Vec<_>>>()?;

    let weights = contraction_weights(&state.factors, j, r);
    let coords = &cache.coords[j];
    let mut h = DMatrix::<f64>::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        contract_into(data.x_row(i), &weights, coords, &mut row);
        for (k, &v) in row.iter().enumerate() {
            h[(i, k)] = v;
        }
    }
    let ytil = DVector::from_vec(cache.residual(data, Some(r)));
    let inv_s2 = 1.0 / state.sigma2;
    let mut precision = h.tr_mul(&h) * inv_s2;
    for (k, &wk) in w.iter().enumerate() {
        precision[(k, k)] += (1.0 / (scale * wk)).min(PRECISION_CAP);
    }
    let linear = h.tr_mul(&ytil) * inv_s2;
    let new_beta = sample_mvn_precision_form(rng, &precision, &linear)
        .map_err(|e| with_context(e, &format!("margin (j={j}, r={r})")))?;

    let fit = &h * &new_beta;
    cache.comp[r].copy_from_slice(fit.as_slice());
    state.factors.margin_mut(j, r).copy_from_slice(new_beta.as_slice());
    state.prior.lambda[idx] = lambda;
    state.prior.w[idx] = w;
    Ok(())
}

/// Step 2: back-fitting over r = 1..R (outer) and j = 1..D (inner).
pub fn step_margins(
    rng: &mut RngStream,
    state: &mut ChainState,
    data: &RegressionData,
    hyper: &MdgdpHyper,
    cache: &mut FitCache,
) -> Result<()> {
    for r in 0..state.factors.rank() {
        for j in 0..state.factors.shape().order() {
            update_margin(rng, state, data, hyper, cache, j, r)?;
        }
    }
    Ok(())
}

/// Step 3: σ² with γ integrated out, then γ | σ².
pub fn step_gamma_sigma(
    rng: &mut RngStream,
    state: &mut ChainState,
    data: &RegressionData,
    cache: &mut FitCache,
    noise: &NoisePrior,
    gamma_prior_variance: f64,
) -> Result<()> {
    let n = data.n() as f64;
    let ytil: Vec<f64> = (0..data.n()).map(|i| data.y()[i] - cache.tensor_fit(i)).collect();
    let ss: f64 = ytil.iter().map(|v| v * v).sum();
    let q = data.q();
    if q == 0 {
        state.sigma2 = sample_inverse_gamma(rng, (n + noise.v) / 2.0, (noise.v * noise.s0sq + ss) / 2.0)?;
        return Ok(());
    }
    let z = data.z();
    let ytil = DVector::from_vec(ytil);
    let mut a = z.tr_mul(z);
    for k in 0..q {
        a[(k, k)] += 1.0 / gamma_prior_variance;
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Z'Z + Σ0⁻¹ is not positive definite".into()))?;
    let zty = z.tr_mul(&ytil);
    let mu = chol.solve(&zty);
    let quad_form = zty.dot(&mu);
    let rate = ((noise.v * noise.s0sq + ss - quad_form) / 2.0).max(SCALE_FLOOR);
    let sigma2 = sample_inverse_gamma(rng, (n + noise.v) / 2.0, rate)?;
    let gamma = sample_mvn_precision_form(rng, &(a / sigma2), &(zty / sigma2))?;
    state.sigma2 = sigma2;
    state.gamma = gamma.iter().cloned().collect();
    cache.zgamma = z_times(data, &state.gamma);
    Ok(())
}

/// Settings shared by every sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub griddy_mode: GriddyMode,
    pub griddy_samples: usize,
    pub noise: NoisePrior,
    pub gamma_prior_variance: f64,
}

impl SweepSettings {
    pub fn from_config(config: &FitConfig) -> Result<Self> {
        Ok(Self {
            griddy_mode: config.griddy_mode,
            griddy_samples: config.griddy_samples,
            noise: config.noise_prior()?,
            gamma_prior_variance: config.gamma_prior_variance,
        })
    }
}

/// Steps (1) → (2) → (3). Returns the α probabilities of step (1).
pub fn sweep(
    rng: &mut RngStream,
    state: &mut ChainState,
    data: &RegressionData,
    hyper: &MdgdpHyper,
    settings: &SweepSettings,
    cache: &mut FitCache,
) -> Result<Vec<f64>> {
    let probs = step_alpha_phi_tau(rng, state, hyper, settings.griddy_mode, settings.griddy_samples)?;
    step_margins(rng, state, data, hyper, cache)?;
    step_gamma_sigma(rng, state, data, cache, &settings.noise, settings.gamma_prior_variance)?;
    Ok(probs)
}

/// Prior latents drawn at the largest grid α, margins damped by 0.1, γ = 0 and σ² = 1.
///
/// Small α makes the prior scales so concentrated near zero that a chain started
/// there cannot leave the B ≈ 0 region in any practical number of sweeps.
pub fn init_state(rng: &mut RngStream, data: &RegressionData, hyper: &MdgdpHyper) -> Result<ChainState> {
    let shape = data.shape();
    hyper.validate()?;
    let alpha = hyper.alpha_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prior = sample_prior_state_at(rng, hyper, shape, alpha)?;
    let mut factors = sample_prior_margins(rng, &prior, shape)?;
    for r in 0..factors.rank() {
        for j in 0..shape.order() {
            factors.margin_mut(j, r).iter_mut().for_each(|v| *v *= 0.1);
        }
    }
    Ok(ChainState { factors, prior, gamma: vec![0.0; data.q()], sigma2: 1.0 })
}

/// A draw of every parameter from the joint prior (no damping).
pub fn draw_from_prior(
    rng: &mut RngStream,
    data: &RegressionData,
    hyper: &MdgdpHyper,
    settings: &SweepSettings,
) -> Result<ChainState> {
    let shape = data.shape();
    let prior = sample_prior_state(rng, hyper, shape)?;
    let factors = sample_prior_margins(rng, &prior, shape)?;
    let sigma2 = sample_inverse_gamma(rng, settings.noise.v / 2.0, settings.noise.v * settings.noise.s0sq / 2.0)?;
    let sd = (sigma2 * settings.gamma_prior_variance).sqrt();
    let gamma = (0..data.q()).map(|_| sd * rng.standard_normal()).collect();
    Ok(ChainState { factors, prior, gamma, sigma2 })
}

/// y ~ N(Zγ + ⟨X, B⟩, σ²) for the covariates in `data`.
pub fn draw_response(rng: &mut RngStream, data: &RegressionData, state: &ChainState) -> Result<Vec<f64>> {
    let cache = FitCache::new(data, state)?;
    let sd = state.sigma2.sqrt();
    Ok((0..data.n())
        .map(|i| cache.zgamma[i] + cache.tensor_fit(i) + sd * rng.standard_normal())
        .collect())
}

pub fn log_likelihood(data: &RegressionData, state: &ChainState, cache: &FitCache) -> f64 {
    let n = data.n() as f64;
    let ss: f64 = cache.residual(data, None).iter().map(|r| r * r).sum();
    -0.5 * n * (2.0 * std::f64::consts::PI * state.sigma2).ln() - ss / (2.0 * state.sigma2)
}

/// Runs the full chain and summarizes retained draws.
///
/// When `data` carries a standardization record, retained B, γ and σ² are mapped
/// back to the raw-data scale before summarizing.
pub fn run_chain(
    rng: &mut RngStream,
    data: &RegressionData,
    config: &FitConfig,
    hyper: &MdgdpHyper,
) -> Result<PosteriorOutput> {
    config.validate()?;
    hyper.validate()?;
    if hyper.rank != config.rank || hyper.order != data.shape().order() {
        return Err(structural(format!(
            "hyperparameters for (D={}, R={}) used with D={}, R={}",
            hyper.order,
            hyper.rank,
            data.shape().order(),
            config.rank
        )));
    }
    let settings = SweepSettings::from_config(config)?;
    let mut state = init_state(rng, data, hyper)?;
    let mut cache = FitCache::new(data, &state)?;
    let mut draws = Draws::new(data.shape().clone(), data.q(), config.rank, config.retained_draws());
    let std = data.standardization();
    for it in 0..config.iterations {
        sweep(rng, &mut state, data, hyper, &settings, &mut cache)
            .map_err(|e| with_context(e, &format!("iteration {it}")))?;
        if log::log_enabled!(log::Level::Debug) {
            log::debug!(
                "iter={} loglik={:.6} sigma2={:.6e} alpha={:.6}",
                it,
                log_likelihood(data, &state, &cache),
                state.sigma2,
                state.prior.alpha
            );
        }
        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            let b = state.factors.assemble().into_values();
            let (b, gamma, sigma2) = match std {
                Some(s) => (s.tensor_to_original(&b), s.gamma_to_original(&state.gamma), s.sigma2_to_original(state.sigma2)),
                None => (b, state.gamma.clone(), state.sigma2),
            };
            draws.push(&b, &gamma, sigma2, state.prior.alpha, state.prior.tau, &state.prior.phi)?;
        }
    }
    summarize(draws)
}

/// Standardizes `raw`, then runs a chain seeded from `config.seed` with the
/// default hyperparameters for the data's order and `config.rank`.
pub fn fit(raw: &RegressionData, config: &FitConfig) -> Result<PosteriorOutput> {
    let data = standardize_data(raw)?;
    let hyper = config.hyper(data.shape().order());
    let mut rng = RngStream::new(config.seed).substream("chain", 0);
    run_chain(&mut rng, &data, config, &hyper)
}
