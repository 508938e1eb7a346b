//! Command-level behaviour of the `mdgdp` binary and library entry points.

use std::path::Path;
use std::process::Command;

use mdgdp::pgm::{read_pgm, GrayScale};
use mdgdp::sampler::summarize_tensor_draws;
use mdgdp::simgen::{support_fraction, ScenarioKind};
use mdgdp_cli::commands::{evaluate, summary_csv, PRIOR_TABLE_HEADER, REPLICATE_HEADER, SUMMARY_HEADER};
use mdgdp_cli::config::RunConfig;
use mdgdp_cli::store::{dataset_path, read_chain, summary_path, DatasetFile, Summary};

const CONFIG: &str = r#"{
  "schema_version": 1,
  "scenario": {"kind": "generated-2d", "shape": [6, 6], "true_rank": 2, "sparsity": 0.2, "n": 60, "seed": 5},
  "fit": {"rank": 3, "iterations": 60, "burn_in": 20, "thin": 2, "seed": 9},
  "replicates": 2
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdgdp"))
}

fn mdgdp(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = bin().args(args).arg("--out").arg(dir).env("RUST_LOG", "warn").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), CONFIG).unwrap();
    dir
}

fn config_arg(dir: &Path) -> String {
    dir.join("run.json").display().to_string()
}

fn ok(dir: &Path, args: &[&str]) {
    let (code, err) = mdgdp(dir, args);
    assert_eq!(code, 0, "{args:?}: {err}");
}

#[test]
fn simulate_is_deterministic_and_guarded() {
    let dir = setup();
    let d = dir.path();
    let cfg = config_arg(d);
    ok(d, &["simulate", "--config", &cfg]);
    let first: Vec<Vec<u8>> = (0..2).map(|k| std::fs::read(dataset_path(d, k)).unwrap()).collect();
    assert_ne!(first[0], first[1]);

    let (code, err) = mdgdp(d, &["simulate", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("--force"), "{err}");

    ok(d, &["simulate", "--config", &cfg, "--force"]);
    for k in 0..2 {
        assert_eq!(std::fs::read(dataset_path(d, k)).unwrap(), first[k]);
    }

    // reload and recount against the manifest; write → read → write is byte-identical
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("manifest.json")).unwrap()).unwrap();
    for k in 0..2 {
        let f = DatasetFile::read(&dataset_path(d, k), ScenarioKind::Generated2d).unwrap();
        assert_eq!(f.seed, 5 + k as u64);
        assert_eq!(manifest["replicates"][k]["sparsity"].as_f64().unwrap(), support_fraction(&f.dataset.b_true));
        assert_eq!(f.to_container().encode(), first[k]);
    }
}

#[test]
fn fit_eval_render_pipeline() {
    let dir = setup();
    let d = dir.path();
    let cfg_path = config_arg(d);
    ok(d, &["simulate", "--config", &cfg_path]);
    ok(d, &["fit"]);

    let cfg = RunConfig::load(&d.join("config.json")).unwrap();
    for k in 0..2 {
        // persisted summary equals a fresh in-memory fit, bitwise
        let file = DatasetFile::read(&dataset_path(d, k), ScenarioKind::Generated2d).unwrap();
        let post = mdgdp::sampler::fit(&file.dataset.data, &cfg.fit.to_fit_config(k as u64)).unwrap();
        let stored = Summary::read(&summary_path(d, "mdgdp", k)).unwrap();
        assert_eq!(stored, Summary::from_posterior(k, &post));
        let bytes = std::fs::read(summary_path(d, "mdgdp", k)).unwrap();
        assert_eq!(stored.to_container().encode(), bytes);

        // recompute the summary from the persisted chain
        let draws = read_chain(&d.join(format!("fits/mdgdp/rep_{k:03}.chain.bin"))).unwrap();
        assert_eq!(draws, post.draws);
        let (m, lo, hi) = summarize_tensor_draws(&draws.shape, &draws.b, draws.len()).unwrap();
        assert_eq!(Some((lo, hi)), stored.interval);
        assert_eq!(m, stored.mean);
    }

    ok(d, &["eval"]);
    let summary = std::fs::read_to_string(d.join("eval/summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
    let reps = std::fs::read_to_string(d.join("eval/replicates.csv")).unwrap();
    assert_eq!(reps.lines().next().unwrap(), REPLICATE_HEADER);
    assert!(summary.lines().any(|l| l.starts_with("lasso,generated-2d,rmse,overall,")));
    assert!(!summary.lines().any(|l| l.starts_with("lasso,generated-2d,coverage")));
    assert_eq!(summary, summary_csv("generated-2d", &evaluate(&cfg, d).unwrap()));

    ok(d, &["render", "--replicate", "1"]);
    let range = std::fs::read_to_string(d.join("render/range.txt")).unwrap();
    let field = |key: &str| -> f64 {
        range.lines().find_map(|l| l.strip_prefix(key)).unwrap().trim().parse().unwrap()
    };
    let scale = GrayScale { lo: field("lo "), hi: field("hi ") };
    let est = Summary::read(&summary_path(d, "mdgdp", 1)).unwrap().mean;
    let img = read_pgm(&d.join("render/mdgdp_rep_001.pgm")).unwrap();
    for row in 0..6 {
        for col in 0..6 {
            assert_eq!(img.get(row, col), u16::from(scale.level(est.get(&[row, col]).unwrap())));
        }
    }
    assert!(d.join("render/truth.pgm").exists());
    assert!(d.join("render/lasso_rep_001.pgm").exists());
}

#[test]
fn same_seed_fits_match_across_runs() {
    let a = setup();
    let b = setup();
    for d in [a.path(), b.path()] {
        let cfg = config_arg(d);
        ok(d, &["simulate", "--config", &cfg, "--replicates", "1", "--methods", "mdgdp"]);
        ok(d, &["fit"]);
    }
    let read = |d: &Path| std::fs::read(summary_path(d, "mdgdp", 0)).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn single_replicate_has_zero_sd() {
    let dir = setup();
    let d = dir.path();
    let cfg = config_arg(d);
    ok(d, &["simulate", "--config", &cfg, "--replicates", "1", "--methods", "lasso"]);
    ok(d, &["fit"]);
    ok(d, &["eval"]);
    let summary = std::fs::read_to_string(d.join("eval/summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "lasso");
        assert_eq!(cols[5], "0", "{line}");
        assert_eq!(cols[6], "1");
    }
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    let (code, err) = mdgdp(d, &["fit"]);
    assert_eq!(code, 2, "{err}");

    std::fs::write(d.join("bad.json"), CONFIG.replace("\"schema_version\": 1", "\"schema_version\": 7")).unwrap();
    let bad = d.join("bad.json").display().to_string();
    assert_eq!(mdgdp(d, &["simulate", "--config", &bad]).0, 2);
    assert_eq!(mdgdp(d, &["simulate", "--config", &config_arg(d), "--methods", "ridge"]).0, 2);
    assert_eq!(mdgdp(d, &["prior-table", "--samples", "10"]).0, 2);
    assert_eq!(mdgdp(d, &["frobnicate"]).0, 2);

    // fitting before simulating is a missing-input failure
    let cfg = config_arg(d);
    assert_eq!(mdgdp(d, &["fit", "--config", &cfg]).0, 1);
}

#[test]
fn prior_table_csv() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["prior-table", "--orders", "2", "--ranks", "1,2", "--samples", "100000"]);
    let text = std::fs::read_to_string(d.join("prior_table.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], PRIOR_TABLE_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,1,"));
    let q: Vec<f64> = lines[2].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[0] < w[1]));
}
