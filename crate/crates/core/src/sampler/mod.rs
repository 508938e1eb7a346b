//! Posterior sampling for the tensor regression model
//!
//! ```text
//! y_i = z_i'γ + ⟨X_i, B⟩ + ε_i,   ε_i ~ N(0, σ²),   B = Σ_r β_1^(r) ∘ ... ∘ β_D^(r)
//! ```
//!
//! under the M-DGDP prior on the margins. Each sweep draws (1) α on its grid by
//! griddy-Gibbs followed by (Φ, τ), (2) (λ_jr, w_jr, β_j^(r)) by back-fitting over
//! components and modes, (3) σ² and γ.

mod chain;
mod data;
mod summary;

pub use chain::{
    alpha_log_weights, calibrate_noise_prior, component_quadratic_forms, draw_from_prior, draw_response, fit, init_state,
    log_likelihood, run_chain, step_alpha_phi_tau, step_gamma_sigma, step_margins, sweep, update_margin, ChainState,
    FitCache, FitConfig, GriddyMode, NoisePrior, SweepSettings,
};
pub use data::{standardize_data, RegressionData, Standardization};
pub use summary::{effective_sample_size, summarize, summarize_tensor_draws, Draws, EffectiveSizes, PosteriorOutput};
