//! Run configuration, a single JSON document.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "scenario": {"kind": "generated-2d", "shape": [16, 16], "true_rank": 3,
//!                "sparsity": 0.07, "n": 500, "seed": 1},
//!   "fit": {"rank": 10, "iterations": 600, "burn_in": 100},
//!   "methods": ["mdgdp", "lasso"],
//!   "replicates": 3
//! }
//! ```
//!
//! Omitted fields take the defaults documented on each struct. Unknown fields
//! are rejected.

use std::path::{Path, PathBuf};

use mdgdp::lasso::LassoOptions;
use mdgdp::sampler::{FitConfig, GriddyMode};
use mdgdp::simgen::{ScenarioKind, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    #[serde(rename = "generated-2d")]
    Generated2d,
    MaskImage,
    #[serde(rename = "case3d-1")]
    Case3d1,
    #[serde(rename = "case3d-2")]
    Case3d2,
    #[serde(rename = "case3d-3")]
    Case3d3,
}

/// Defaults: b̄ = 1, σ0 = 1, γ0 = [] (or [0.5, 2] for 3D cases), seed 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default)]
    pub shape: Vec<usize>,
    #[serde(default = "one_usize")]
    pub true_rank: usize,
    #[serde(default = "one_f64")]
    pub sparsity: f64,
    #[serde(default = "one_f64")]
    pub b_bar: f64,
    pub n: usize,
    #[serde(default = "one_f64")]
    pub sigma0: f64,
    #[serde(default)]
    pub gamma0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Graymap file for `mask-image`, relative to the config file.
    #[serde(default)]
    pub mask_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GriddyChoice {
    Exact,
    MonteCarlo,
}

/// Defaults follow the library's `FitConfig::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub rank: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub griddy_samples: usize,
    pub griddy_mode: GriddyChoice,
    pub seed: u64,
    pub v: f64,
    pub gamma_prior_variance: f64,
    pub noise_v: f64,
    pub noise_s0sq: Option<f64>,
    pub noise_target: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            rank: d.rank,
            iterations: d.iterations,
            burn_in: d.burn_in,
            thin: d.thin,
            griddy_samples: d.griddy_samples,
            griddy_mode: GriddyChoice::Exact,
            seed: d.seed,
            v: d.v,
            gamma_prior_variance: d.gamma_prior_variance,
            noise_v: d.noise_v,
            noise_s0sq: d.noise_s0sq,
            noise_target: d.noise_target,
        }
    }
}

impl FitSection {
    /// Chain settings for replicate `k` (seed offset by k).
    pub fn to_fit_config(&self, replicate: u64) -> FitConfig {
        FitConfig {
            rank: self.rank,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            griddy_samples: self.griddy_samples,
            griddy_mode: match self.griddy_mode {
                GriddyChoice::Exact => GriddyMode::Exact,
                GriddyChoice::MonteCarlo => GriddyMode::MonteCarlo,
            },
            seed: self.seed.wrapping_add(replicate),
            v: self.v,
            gamma_prior_variance: self.gamma_prior_variance,
            noise_v: self.noise_v,
            noise_s0sq: self.noise_s0sq,
            noise_target: self.noise_target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSection {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoSection {
    fn default() -> Self {
        let d = LassoOptions::default();
        Self { n_lambda: d.n_lambda, lambda_min_ratio: d.lambda_min_ratio, folds: d.folds, tol: d.tol, max_sweeps: d.max_sweeps }
    }
}

impl LassoSection {
    pub fn to_options(&self) -> LassoOptions {
        LassoOptions {
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            folds: self.folds,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mdgdp,
    Lasso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mdgdp => "mdgdp",
            Method::Lasso => "lasso",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s.trim() {
            "mdgdp" => Ok(Method::Mdgdp),
            "lasso" => Ok(Method::Lasso),
            other => Err(CliError::Config(format!("unknown method '{other}' (expected mdgdp or lasso)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub lasso: LassoSection,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "one_usize")]
    pub replicates: usize,
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn default_methods() -> Vec<Method> {
    vec![Method::Mdgdp, Method::Lasso]
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative mask path is resolved against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(mask) = &cfg.scenario.mask_path {
            if mask.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.scenario.mask_path = Some(base.join(mask));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        if self.scenario.kind == Kind::MaskImage && self.scenario.mask_path.is_none() {
            return Err(CliError::Config("mask-image scenarios need mask_path".into()));
        }
        self.scenario_spec()
            .validate()
            .map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        self.fit
            .to_fit_config(0)
            .validate()
            .map_err(|e| CliError::Config(format!("fit: {e}")))?;
        if self.lasso.folds < 2 || self.lasso.n_lambda == 0 || !(self.lasso.lambda_min_ratio > 0.0 && self.lasso.lambda_min_ratio <= 1.0) {
            return Err(CliError::Config("lasso: need folds ≥ 2, n_lambda ≥ 1, lambda_min_ratio in (0, 1]".into()));
        }
        if self.lasso.folds > self.scenario.n {
            return Err(CliError::Config(format!("lasso: {} folds for n = {}", self.lasso.folds, self.scenario.n)));
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        let (kind, shape, default_gamma) = match s.kind {
            Kind::Generated2d => (ScenarioKind::Generated2d, s.shape.clone(), vec![]),
            Kind::MaskImage => (
                ScenarioKind::MaskImage { path: s.mask_path.clone().unwrap_or_default() },
                s.shape.clone(),
                vec![],
            ),
            Kind::Case3d1 | Kind::Case3d2 | Kind::Case3d3 => {
                let c = match s.kind {
                    Kind::Case3d1 => 1,
                    Kind::Case3d2 => 2,
                    _ => 3,
                };
                (ScenarioKind::Case3d(c), vec![30, 30, 30], vec![0.5, 2.0])
            }
        };
        ScenarioSpec {
            kind,
            shape,
            true_rank: s.true_rank,
            sparsity: s.sparsity,
            b_bar: s.b_bar,
            n: s.n,
            sigma0: s.sigma0,
            gamma0: s.gamma0.clone().unwrap_or(default_gamma),
            seed: s.seed,
        }
    }
}
