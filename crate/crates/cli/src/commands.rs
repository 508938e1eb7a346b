use std::path::{Path, PathBuf};

use mdgdp::lasso::lasso_fit;
use mdgdp::metrics::{aggregate_replicates, EvalReport, MetricSummary, METRIC_ROWS};
use mdgdp::pgm::{encode_pgm, render, slices_3d, GrayScale};
use mdgdp::prior::{default_hyper, induced_prior_quantiles};
use mdgdp::random::RngStream;
use mdgdp::sampler::{fit, standardize_data};
use mdgdp::simgen::{generate, scenario_truth};
use mdgdp::tensor::DenseTensor;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Method, RunConfig};
use crate::error::{core, CliError, CliResult};
use crate::store::{
    chain_container, chain_path, dataset_path, guard_outputs, replicate_name, summary_path, write_atomic, DatasetFile, Summary,
};

fn scenario_label(cfg: &RunConfig) -> String {
    serde_json::to_value(cfg.scenario.kind)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn first_error<T>(results: Vec<CliResult<T>>) -> CliResult<Vec<T>> {
    results.into_iter().collect()
}

/// Writes the effective config, one dataset per replicate and a manifest.
pub fn simulate(cfg: &RunConfig, out: &Path, force: bool) -> CliResult<()> {
    let spec = cfg.scenario_spec();
    let mut targets = vec![out.join("config.json"), out.join("manifest.json")];
    targets.extend((0..cfg.replicates).map(|k| dataset_path(out, k)));
    guard_outputs(&targets, force)?;

    let truth = scenario_truth(&spec).map_err(core("building the true tensor"))?;
    let label = scenario_label(cfg);
    let entries = first_error(
        (0..cfg.replicates)
            .into_par_iter()
            .map(|k| {
                let dataset = generate(&spec, &truth, k as u64).map_err(core(format!("replicate {k}")))?;
                let file = DatasetFile { replicate: k, seed: spec.seed.wrapping_add(k as u64), scenario: label.clone(), dataset };
                write_atomic(&dataset_path(out, k), &file.to_container().encode())?;
                log::info!("wrote {}", dataset_path(out, k).display());
                Ok(json!({
                    "replicate": k,
                    "seed": file.seed,
                    "file": format!("data/{}.bin", replicate_name(k)),
                    "sparsity": file.dataset.sparsity,
                }))
            })
            .collect(),
    )?;
    let manifest = json!({
        "scenario": label,
        "shape": truth.shape().dims(),
        "n": spec.n,
        "replicates": entries,
    });
    write_atomic(&out.join("config.json"), cfg.to_json().as_bytes())?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&out.join("manifest.json"), text.as_bytes())
}

fn fit_one(cfg: &RunConfig, out: &Path, k: usize, method: Method) -> CliResult<()> {
    let ctx = format!("replicate {k}, method {}", method.name());
    let file = DatasetFile::read(&dataset_path(out, k), cfg.scenario_spec().kind)?;
    let raw = &file.dataset.data;
    let summary = match method {
        Method::Mdgdp => {
            let post = fit(raw, &cfg.fit.to_fit_config(k as u64)).map_err(core(&ctx))?;
            write_atomic(&chain_path(out, method.name(), k), &chain_container(method.name(), k, &post.draws).encode())?;
            Summary::from_posterior(k, &post)
        }
        Method::Lasso => {
            let data = standardize_data(raw).map_err(core(&ctx))?;
            let lf = lasso_fit(&data, None, &cfg.lasso.to_options()).map_err(core(&ctx))?;
            let s = data.standardization().expect("standardized data carries its record");
            Summary {
                method: method.name().into(),
                replicate: k,
                mean: lf.tensor_estimate(&data).map_err(core(&ctx))?,
                interval: None,
                gamma_mean: s.gamma_to_original(lf.gamma()),
                sigma2_mean: None,
                info: json!({"lambda": lf.lambda, "sweeps": lf.objective_trace.len()}),
            }
        }
    };
    write_atomic(&summary_path(out, method.name(), k), &summary.to_container().encode())?;
    log::info!("finished {ctx}");
    Ok(())
}

/// Fits every configured method to every replicate, in parallel over replicates.
pub fn fit_all(cfg: &RunConfig, out: &Path, force: bool) -> CliResult<()> {
    let jobs: Vec<(usize, Method)> = (0..cfg.replicates).flat_map(|k| cfg.methods.iter().map(move |&m| (k, m))).collect();
    let mut targets = Vec::new();
    for &(k, m) in &jobs {
        targets.push(summary_path(out, m.name(), k));
        if m == Method::Mdgdp {
            targets.push(chain_path(out, m.name(), k));
        }
    }
    guard_outputs(&targets, force)?;
    first_error(jobs.into_par_iter().map(|(k, m)| fit_one(cfg, out, k, m)).collect())?;
    Ok(())
}

/// Per-replicate scores and their aggregate for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodEval {
    pub method: Method,
    pub replicates: Vec<EvalReport>,
    pub aggregate: Vec<MetricSummary>,
}

pub const SUMMARY_HEADER: &str = "method,scenario,metric,group,mean,sd,replicates";
pub const REPLICATE_HEADER: &str = "method,scenario,replicate,metric,group,value";

pub fn evaluate(cfg: &RunConfig, out: &Path) -> CliResult<Vec<MethodEval>> {
    let kind = cfg.scenario_spec().kind;
    let truths = first_error(
        (0..cfg.replicates)
            .into_par_iter()
            .map(|k| DatasetFile::read(&dataset_path(out, k), kind.clone()).map(|f| f.dataset.b_true))
            .collect(),
    )?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            let reports = (0..cfg.replicates)
                .map(|k| {
                    let s = Summary::read(&summary_path(out, m.name(), k))?;
                    let interval = s.interval.as_ref().map(|(l, u)| (l, u));
                    EvalReport::evaluate(&s.mean, interval, &truths[k]).map_err(core(format!("scoring {} replicate {k}", m.name())))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let aggregate = aggregate_replicates(&reports).map_err(core("aggregating"))?;
            Ok(MethodEval { method: m, replicates: reports, aggregate })
        })
        .collect()
}

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn summary_csv(scenario: &str, evals: &[MethodEval]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for e in evals {
        for m in &e.aggregate {
            s.push_str(&format!("{},{scenario},{},{},{},{},{}\n", e.method.name(), m.metric, m.group, m.mean, m.sd, m.replicates));
        }
    }
    s
}

pub fn replicates_csv(scenario: &str, evals: &[MethodEval]) -> String {
    let mut s = format!("{REPLICATE_HEADER}\n");
    for e in evals {
        for (k, r) in e.replicates.iter().enumerate() {
            for (&(metric, group), v) in METRIC_ROWS.iter().zip(r.values()) {
                if v.is_some() {
                    s.push_str(&format!("{},{scenario},{k},{metric},{group},{}\n", e.method.name(), num(v)));
                }
            }
        }
    }
    s
}

fn report_json(scenario: &str, evals: &[MethodEval]) -> String {
    let methods: serde_json::Map<String, serde_json::Value> = evals
        .iter()
        .map(|e| {
            let reps: Vec<_> = e
                .replicates
                .iter()
                .map(|r| {
                    let fields: serde_json::Map<_, _> = METRIC_ROWS
                        .iter()
                        .zip(r.values())
                        .map(|(&(m, g), v)| (format!("{m}_{g}"), json!(v)))
                        .collect();
                    serde_json::Value::Object(fields)
                })
                .collect();
            let agg: Vec<_> = e
                .aggregate
                .iter()
                .map(|m| json!({"metric": m.metric, "group": m.group, "mean": m.mean, "sd": m.sd, "replicates": m.replicates}))
                .collect();
            (e.method.name().to_string(), json!({"replicates": reps, "aggregate": agg}))
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({"scenario": scenario, "methods": methods})).expect("report serializes");
    s.push('\n');
    s
}

/// Scores persisted summaries against the truth and writes the tables.
pub fn eval(cfg: &RunConfig, out: &Path, force: bool) -> CliResult<Vec<MethodEval>> {
    let dir = out.join("eval");
    let targets = [dir.join("summary.csv"), dir.join("replicates.csv"), dir.join("report.json")];
    guard_outputs(&targets, force)?;
    let evals = evaluate(cfg, out)?;
    let label = scenario_label(cfg);
    write_atomic(&targets[0], summary_csv(&label, &evals).as_bytes())?;
    write_atomic(&targets[1], replicates_csv(&label, &evals).as_bytes())?;
    write_atomic(&targets[2], report_json(&label, &evals).as_bytes())?;
    Ok(evals)
}

fn render_images(name: &str, t: &DenseTensor, scale: &GrayScale) -> CliResult<Vec<(String, Vec<u8>)>> {
    let unsupported = |e: mdgdp::Error| CliError::Config(format!("cannot render {name}: {e}"));
    match t.shape().order() {
        2 => Ok(vec![(format!("{name}.pgm"), encode_pgm(&render(t, scale).map_err(unsupported)?))]),
        3 => slices_3d(t)
            .map_err(unsupported)?
            .iter()
            .enumerate()
            .map(|(k, s)| Ok((format!("{name}_slice{k:02}.pgm"), encode_pgm(&render(s, scale).map_err(unsupported)?))))
            .collect(),
        d => Err(CliError::Config(format!("cannot render {name}: tensors of order {d} are not supported"))),
    }
}

/// Renders truth and the estimate of every available method for one replicate
/// on a shared gray scale. Returns the scale used.
pub fn render_replicate(cfg: &RunConfig, out: &Path, replicate: usize, force: bool) -> CliResult<GrayScale> {
    let file = DatasetFile::read(&dataset_path(out, replicate), cfg.scenario_spec().kind)?;
    let mut named: Vec<(String, DenseTensor)> = vec![("truth".into(), file.dataset.b_true)];
    for m in &cfg.methods {
        let p = summary_path(out, m.name(), replicate);
        if p.exists() {
            named.push((format!("{}_{}", m.name(), replicate_name(replicate)), Summary::read(&p)?.mean));
        }
    }
    let scale = GrayScale::covering(&named.iter().map(|(_, t)| t).collect::<Vec<_>>());
    let mut files = Vec::new();
    for (name, t) in &named {
        files.extend(render_images(name, t, &scale)?);
    }
    let dir = out.join("render");
    let range = format!(
        "lo {}\nhi {}\nlevel = round(255 * (x - lo) / (hi - lo)), clamped to 0..255; 128 everywhere when lo = hi\n",
        scale.lo, scale.hi
    );
    let mut targets: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    targets.push(dir.join("range.txt"));
    guard_outputs(&targets, force)?;
    for (n, bytes) in &files {
        write_atomic(&dir.join(n), bytes)?;
    }
    write_atomic(&dir.join("range.txt"), range.as_bytes())?;
    Ok(scale)
}

pub const PRIOR_TABLE_HEADER: &str = "D,R,q05,q25,q50,q75,q95";

/// Induced prior quantiles of |B| for every (D, R) pair, each from its own substream.
pub fn prior_table(orders: &[usize], ranks: &[usize], samples: usize, seed: u64) -> CliResult<String> {
    if orders.iter().any(|&d| d < 1) || ranks.iter().any(|&r| r < 1) || orders.is_empty() || ranks.is_empty() {
        return Err(CliError::Config("orders and ranks must be non-empty lists of positive integers".into()));
    }
    let pairs: Vec<(usize, usize)> = orders.iter().flat_map(|&d| ranks.iter().map(move |&r| (d, r))).collect();
    let rows = first_error(
        pairs
            .par_iter()
            .map(|&(d, r)| {
                let mut rng = RngStream::new(seed).substream("prior-table", (d * 1_000_000 + r) as u64);
                let q = induced_prior_quantiles(&mut rng, &default_hyper(d, r), samples).map_err(core(format!("D={d}, R={r}")))?;
                Ok(format!("{d},{r},{},{},{},{},{}\n", q[0], q[1], q[2], q[3], q[4]))
            })
            .collect(),
    )?;
    Ok(std::iter::once(format!("{PRIOR_TABLE_HEADER}\n")).chain(rows).collect())
}
