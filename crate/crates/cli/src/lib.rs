//! Batch front end: simulate datasets, fit M-DGDP and Lasso, score the fits,
//! render images and tabulate induced prior quantiles.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod store;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mdgdp", version, about = "Bayesian tensor regression with the M-DGDP prior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (JSON). Defaults to <out>/config.json for every command but simulate.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Run directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Overrides both the scenario and the chain seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,

    #[arg(long, global = true)]
    pub replicates: Option<usize>,

    /// Comma-separated subset of mdgdp,lasso.
    #[arg(long, global = true)]
    pub methods: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one dataset per replicate.
    Simulate,
    /// Fit every method to every replicate.
    Fit,
    /// Score fits against the truth and write CSV/JSON tables.
    Eval,
    /// Write graymap renders of truth and estimates.
    Render {
        #[arg(long, default_value_t = 0)]
        replicate: usize,
    },
    /// Percentiles of |B| at one voxel under the prior.
    PriorTable {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3])]
        orders: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 5, 10])]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli.config.clone().unwrap_or_else(|| cli.out.join("config.json"));
    if !path.exists() {
        return Err(CliError::Config(format!("{}: config file not found", path.display())));
    }
    let mut cfg = RunConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.scenario.seed = s;
        cfg.fit.seed = s;
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    if let Some(m) = &cli.methods {
        cfg.methods = m.split(',').filter(|s| !s.trim().is_empty()).map(Method::parse).collect::<CliResult<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let out: &Path = &cli.out;
    match &cli.command {
        Command::Simulate => commands::simulate(&load_config(cli)?, out, cli.force),
        Command::Fit => commands::fit_all(&load_config(cli)?, out, cli.force),
        Command::Eval => commands::eval(&load_config(cli)?, out, cli.force).map(|_| ()),
        Command::Render { replicate } => {
            let cfg = load_config(cli)?;
            if *replicate >= cfg.replicates {
                return Err(CliError::Config(format!("replicate {replicate} out of range (have {})", cfg.replicates)));
            }
            commands::render_replicate(&cfg, out, *replicate, cli.force).map(|_| ())
        }
        Command::PriorTable { orders, ranks, samples } => {
            let target = out.join("prior_table.csv");
            store::guard_outputs(std::slice::from_ref(&target), cli.force)?;
            let csv = commands::prior_table(orders, ranks, *samples, cli.seed.unwrap_or(0))?;
            store::write_atomic(&target, csv.as_bytes())
        }
    }
}
