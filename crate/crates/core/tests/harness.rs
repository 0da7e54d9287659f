use std::fs;

use tempfile::TempDir;
use vcdf::discovery::{DiscovererConfig, Method};
use vcdf::harness::{
    bench_report_from_json, bench_report_to_json, derive_seed, discover, evaluate_files, generate,
    load_manifest, render_table, run_bench, BenchConfig, DiscoverRequest, ExperimentConfig, Preset,
    Variant,
};
use vcdf::synthgen::Setting;
use vcdf::{EdgeKey, VcdfConfig};

fn small_experiment(dir: &std::path::Path, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 5,
        len: 400,
        realizations: 2,
        seed,
        out_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn request(
    input: std::path::PathBuf,
    out: std::path::PathBuf,
    vcdf: Option<VcdfConfig>,
) -> DiscoverRequest {
    DiscoverRequest {
        input,
        method: Method::VarLingam,
        discoverer: DiscovererConfig::default(),
        alpha: 0.01,
        vcdf,
        truth: None,
        out_dir: out,
    }
}

#[test]
fn generated_suite_reloads_with_matching_seeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_experiment(tmp.path(), 17);
    let manifest = generate(&cfg).unwrap();
    let (loaded, data) = load_manifest(tmp.path()).unwrap();
    assert_eq!(loaded, manifest);
    assert_eq!(data.len(), 2);
    let suite = cfg.suite_params();
    for (i, d) in data.iter().enumerate() {
        assert_eq!(manifest.datasets[i].seed, suite.realization_seed(i));
        let fresh = suite.generate_one(i).unwrap();
        assert_eq!(d.truth, fresh.truth);
        assert_eq!(d.series, fresh.series);
    }
    assert_ne!(derive_seed(17, "a", 0), derive_seed(18, "a", 0));
}

#[test]
fn vacuous_consensus_writes_identical_graph_file() {
    let tmp = TempDir::new().unwrap();
    generate(&small_experiment(&tmp.path().join("data"), 3)).unwrap();
    let input = tmp.path().join("data/series_000.csv");
    discover(&request(input.clone(), tmp.path().join("base"), None)).unwrap();
    discover(&request(
        input,
        tmp.path().join("vac"),
        Some(VcdfConfig::vacuous(5)),
    ))
    .unwrap();
    assert_eq!(
        fs::read(tmp.path().join("base/graph.json")).unwrap(),
        fs::read(tmp.path().join("vac/graph.json")).unwrap()
    );
    assert!(tmp.path().join("vac/stability.json").exists());
    assert!(!tmp.path().join("base/stability.json").exists());
}

#[test]
fn single_edge_dataset_is_recovered_end_to_end() {
    use vcdf::synthgen::{simulate, Noise, Nonlinearity, ScmEdge, ScmSpec};
    let tmp = TempDir::new().unwrap();
    let spec = ScmSpec {
        n: 2,
        max_lag: 1,
        lag_edges: vec![ScmEdge {
            cause: 0,
            effect: 1,
            lag: 1,
            coefficient: 0.8,
        }],
        inst_edges: vec![],
        noise: Noise::Uniform,
        nonlinearity: Nonlinearity::None,
        trend_slope: 0.0,
        seed: 5,
    };
    let d = simulate(&spec, 2000, 200).unwrap();
    let input = tmp.path().join("s.csv");
    vcdf::series::write_series_csv(&d.series, &input).unwrap();
    let truth = tmp.path().join("t.json");
    fs::write(&truth, vcdf::graph::graph_to_json(&d.truth)).unwrap();
    let mut req = request(input, tmp.path().join("out"), None);
    req.truth = Some(truth.clone());
    let out = discover(&req).unwrap();
    assert!(out.graph.contains(&EdgeKey::new(0, 1, 1)));
    let m = out.metrics.unwrap();
    assert_eq!(m.window.recall, 1.0);
    assert_eq!(
        evaluate_files(&tmp.path().join("out/graph.json"), &truth).unwrap(),
        m
    );
}

#[test]
fn failed_discovery_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let err = discover(&request(
        tmp.path().join("none.csv"),
        tmp.path().join("out"),
        None,
    ))
    .unwrap_err();
    assert!(err.is_input_error());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bench_report_round_trips_and_rerenders() {
    let mut cfg = BenchConfig::preset(Preset::Lengths, 1);
    cfg.n = 4;
    cfg.realizations = 2;
    cfg.lengths = vec![200, 300];
    let report = run_bench(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2 * 4);
    assert!(report
        .row(Setting::Linear, 300, Variant::VCDF_LAGREG)
        .is_some());
    assert_eq!(cfg.warnings().len(), 1);
    let back = bench_report_from_json(&bench_report_to_json(&report).unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(render_table(&back), render_table(&report));
    let table = render_table(&report);
    assert_eq!(table.lines().count(), 3 + report.rows.len());
    assert!(table.contains(" ± "));
}

#[test]
fn bench_scores_are_reproducible() {
    let mut cfg = BenchConfig::preset(Preset::Characteristics, 9);
    cfg.n = 4;
    cfg.realizations = 3;
    cfg.lengths = vec![200];
    cfg.settings = vec![Setting::Trended];
    let (a, b) = (run_bench(&cfg).unwrap(), run_bench(&cfg).unwrap());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.window, x.summary), (y.window, y.summary));
    }
}
