//! On-disk layout of a run directory and the typed files inside it.
//!
//! ```text
//! <out>/config.json                 effective configuration
//! <out>/manifest.json               replicate seeds, files and achieved sparsity
//! <out>/data/rep_000.bin            dataset per replicate
//! <out>/fits/<method>/rep_000.chain.bin    retained draws (M-DGDP only)
//! <out>/fits/<method>/rep_000.summary.bin  point estimate and intervals
//! <out>/eval/{summary.csv,replicates.csv,report.json}
//! <out>/render/*.pgm, <out>/render/range.txt
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use mdgdp::sampler::{Draws, PosteriorOutput, RegressionData};
use mdgdp::simgen::GeneratedDataset;
use mdgdp::tensor::{DenseTensor, TensorShape};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::container::Container;
use crate::error::{io, CliError, CliResult};

pub fn replicate_name(k: usize) -> String {
    format!("rep_{k:03}")
}

pub fn dataset_path(out: &Path, k: usize) -> PathBuf {
    out.join("data").join(format!("{}.bin", replicate_name(k)))
}

pub fn chain_path(out: &Path, method: &str, k: usize) -> PathBuf {
    out.join("fits").join(method).join(format!("{}.chain.bin", replicate_name(k)))
}

pub fn summary_path(out: &Path, method: &str, k: usize) -> PathBuf {
    out.join("fits").join(method).join(format!("{}.summary.bin", replicate_name(k)))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Fails if any of `paths` exists and `force` is off.
pub fn guard_outputs(paths: &[PathBuf], force: bool) -> CliResult<()> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Exists { path: p.clone() });
        }
    }
    Ok(())
}

fn format_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Format { path: path.to_path_buf(), message: message.into() }
}

pub fn read_container(path: &Path, kind: &str) -> CliResult<Container> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    let c = Container::decode(&bytes).map_err(|m| format_err(path, m))?;
    if c.kind != kind {
        return Err(format_err(path, format!("expected a {kind} file, found {}", c.kind)));
    }
    Ok(c)
}

fn shape_of(path: &Path, meta: &Value) -> CliResult<TensorShape> {
    let dims: Vec<usize> = serde_json::from_value(meta["shape"].clone()).map_err(|e| format_err(path, format!("shape: {e}")))?;
    TensorShape::new(dims).map_err(|e| format_err(path, e.to_string()))
}

fn meta_usize(path: &Path, meta: &Value, key: &str) -> CliResult<usize> {
    meta[key]
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| format_err(path, format!("missing integer '{key}' in header")))
}

fn block_data(path: &Path, c: &Container, name: &str, dims: &[usize]) -> CliResult<Vec<f64>> {
    let b = c.block(name).map_err(|m| format_err(path, m))?;
    if b.dims != dims {
        return Err(format_err(path, format!("block '{name}' has dims {:?}, expected {dims:?}", b.dims)));
    }
    Ok(b.data.clone())
}

fn tensor_block(path: &Path, c: &Container, name: &str, shape: &TensorShape) -> CliResult<DenseTensor> {
    let data = block_data(path, c, name, shape.dims())?;
    DenseTensor::new(shape.clone(), data).map_err(|e| format_err(path, e.to_string()))
}

/// A dataset together with its provenance within the run.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub replicate: usize,
    pub seed: u64,
    pub scenario: String,
    pub dataset: GeneratedDataset,
}

impl DatasetFile {
    pub fn to_container(&self) -> Container {
        let d = &self.dataset;
        let shape = d.b_true.shape().dims().to_vec();
        let (n, q, nv) = (d.data.n(), d.data.q(), d.data.shape().len());
        let mut c = Container::new(
            "dataset",
            json!({
                "replicate": self.replicate,
                "seed": self.seed,
                "scenario": self.scenario,
                "shape": shape,
                "n": n,
                "q": q,
                "sparsity": d.sparsity,
                "sigma0": d.sigma0,
            }),
        );
        c.push("b_true", shape, d.b_true.values().to_vec());
        c.push("gamma_true", vec![q], d.gamma_true.clone());
        c.push("y", vec![n], d.data.y().to_vec());
        c.push("z", vec![n, q], d.data.z().as_slice().to_vec());
        c.push("x", vec![nv, n], d.data.x_flat().to_vec());
        c
    }

    pub fn read(path: &Path, kind: mdgdp::simgen::ScenarioKind) -> CliResult<Self> {
        let c = read_container(path, "dataset")?;
        let shape = shape_of(path, &c.meta)?;
        let n = meta_usize(path, &c.meta, "n")?;
        let q = meta_usize(path, &c.meta, "q")?;
        let b_true = tensor_block(path, &c, "b_true", &shape)?;
        let gamma_true = block_data(path, &c, "gamma_true", &[q])?;
        let y = block_data(path, &c, "y", &[n])?;
        let z = DMatrix::from_column_slice(n, q, &block_data(path, &c, "z", &[n, q])?);
        let x = block_data(path, &c, "x", &[shape.len(), n])?;
        let data = RegressionData::from_flat(shape, y, z, x).map_err(|e| format_err(path, e.to_string()))?;
        let f = |k: &str| c.meta[k].as_f64().ok_or_else(|| format_err(path, format!("missing number '{k}'")));
        Ok(Self {
            replicate: meta_usize(path, &c.meta, "replicate")?,
            seed: c.meta["seed"].as_u64().ok_or_else(|| format_err(path, "missing seed"))?,
            scenario: c.meta["scenario"].as_str().unwrap_or_default().to_string(),
            dataset: GeneratedDataset { data, b_true, gamma_true, sigma0: f("sigma0")?, sparsity: f("sparsity")?, kind },
        })
    }
}

pub fn chain_container(method: &str, replicate: usize, draws: &Draws) -> Container {
    let t = draws.len();
    let mut c = Container::new(
        "chain",
        json!({
            "method": method,
            "replicate": replicate,
            "shape": draws.shape.dims(),
            "q": draws.q,
            "rank": draws.rank,
            "draws": t,
        }),
    );
    c.push("b", vec![draws.shape.len(), t], draws.b.clone());
    c.push("gamma", vec![draws.q, t], draws.gamma.clone());
    c.push("sigma2", vec![t], draws.sigma2.clone());
    c.push("alpha", vec![t], draws.alpha.clone());
    c.push("tau", vec![t], draws.tau.clone());
    c.push("phi", vec![draws.rank, t], draws.phi.clone());
    c
}

pub fn read_chain(path: &Path) -> CliResult<Draws> {
    let c = read_container(path, "chain")?;
    let shape = shape_of(path, &c.meta)?;
    let q = meta_usize(path, &c.meta, "q")?;
    let rank = meta_usize(path, &c.meta, "rank")?;
    let t = meta_usize(path, &c.meta, "draws")?;
    Ok(Draws {
        b: block_data(path, &c, "b", &[shape.len(), t])?,
        gamma: block_data(path, &c, "gamma", &[q, t])?,
        sigma2: block_data(path, &c, "sigma2", &[t])?,
        alpha: block_data(path, &c, "alpha", &[t])?,
        tau: block_data(path, &c, "tau", &[t])?,
        phi: block_data(path, &c, "phi", &[rank, t])?,
        shape,
        q,
        rank,
    })
}

/// Point estimate of one method on one replicate, on the raw-data scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: String,
    pub replicate: usize,
    pub mean: DenseTensor,
    pub interval: Option<(DenseTensor, DenseTensor)>,
    pub gamma_mean: Vec<f64>,
    pub sigma2_mean: Option<f64>,
    /// Method-specific details (effective sample sizes, chosen λ).
    pub info: Value,
}

impl Summary {
    pub fn from_posterior(replicate: usize, post: &PosteriorOutput) -> Self {
        let e = &post.ess;
        Self {
            method: "mdgdp".into(),
            replicate,
            mean: post.mean.clone(),
            interval: Some((post.lower.clone(), post.upper.clone())),
            gamma_mean: post.gamma_mean.clone(),
            sigma2_mean: Some(post.sigma2_mean),
            info: json!({
                "draws": post.draws.len(),
                "ess": {"sigma2": e.sigma2, "tau": e.tau, "alpha": e.alpha, "b_median": e.b_median, "gamma_min": e.gamma_min},
            }),
        }
    }

    pub fn to_container(&self) -> Container {
        let shape = self.mean.shape().dims().to_vec();
        let mut c = Container::new(
            "summary",
            json!({
                "method": self.method,
                "replicate": self.replicate,
                "shape": shape,
                "q": self.gamma_mean.len(),
                "intervals": self.interval.is_some(),
                "info": self.info,
            }),
        );
        c.push("mean", shape.clone(), self.mean.values().to_vec());
        if let Some((lo, hi)) = &self.interval {
            c.push("lower", shape.clone(), lo.values().to_vec());
            c.push("upper", shape, hi.values().to_vec());
        }
        c.push("gamma_mean", vec![self.gamma_mean.len()], self.gamma_mean.clone());
        if let Some(s) = self.sigma2_mean {
            c.push("sigma2_mean", vec![1], vec![s]);
        }
        c
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let c = read_container(path, "summary")?;
        let shape = shape_of(path, &c.meta)?;
        let q = meta_usize(path, &c.meta, "q")?;
        let interval = if c.meta["intervals"].as_bool() == Some(true) {
            Some((tensor_block(path, &c, "lower", &shape)?, tensor_block(path, &c, "upper", &shape)?))
        } else {
            None
        };
        let sigma2_mean = match c.block("sigma2_mean") {
            Ok(_) => Some(block_data(path, &c, "sigma2_mean", &[1])?[0]),
            Err(_) => None,
        };
        Ok(Self {
            method: c.meta["method"].as_str().unwrap_or_default().to_string(),
            replicate: meta_usize(path, &c.meta, "replicate")?,
            mean: tensor_block(path, &c, "mean", &shape)?,
            interval,
            gamma_mean: block_data(path, &c, "gamma_mean", &[q])?,
            sigma2_mean,
            info: c.meta["info"].clone(),
        })
    }
}
