//! Experiment runner behind the `vcdf` command line: dataset generation,
//! discovery with optional consensus filtering, scoring, and benchmark
//! presets with timing.
//!
//! All randomness derives from one master seed. A task named `name` gets
//! the suite seed `derive_seed(master, name, 0)`; realization `i` of a suite
//! then uses `suite_seed + i`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{run_vcdf, stability_report_to_json, VcdfConfig};
use crate::discovery::{build_discoverer, DiscovererConfig, Method, DEFAULT_LAGREG_ALPHA};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, score, AggregateStats, F1Result, GraphScores, MeanStd};
use crate::graph::{graph_from_json, graph_to_json, WindowGraph};
use crate::series::{read_series_csv, write_series_csv, MultivariateSeries};
use crate::synthgen::{
    LabeledDataset, Setting, SuiteParams, DEFAULT_BURN_IN, DEFAULT_DENSITY, DEFAULT_MAX_LAG,
};

/// SHA-256 of `master || task || index` (little-endian integers), truncated
/// to the first 8 bytes.
pub fn derive_seed(master: u64, task: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(task.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub n: usize,
    pub len: usize,
    pub realizations: usize,
    pub density: f64,
    pub burn_in: usize,
    pub method: Method,
    pub max_lag: usize,
    /// `None` selects the method's default threshold.
    pub prune: Option<f64>,
    pub alpha: f64,
    /// Consensus filtering; `None` runs the base method alone.
    pub vcdf: Option<VcdfConfig>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::Linear,
            n: 15,
            len: 1000,
            realizations: 10,
            density: DEFAULT_DENSITY,
            burn_in: DEFAULT_BURN_IN,
            method: Method::VarLingam,
            max_lag: DEFAULT_MAX_LAG,
            prune: None,
            alpha: DEFAULT_LAGREG_ALPHA,
            vcdf: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn discoverer_config(&self) -> Result<DiscovererConfig> {
        let prune = self
            .prune
            .unwrap_or(self.method.default_config().prune_threshold);
        DiscovererConfig::new(self.max_lag, prune)
    }

    pub fn validate(&self) -> Result<()> {
        self.discoverer_config()?;
        if let Some(v) = &self.vcdf {
            v.validate()?;
        }
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        Ok(())
    }

    pub fn suite_params(&self) -> SuiteParams {
        let task = format!("generate/{}/n{}/T{}", self.setting, self.n, self.len);
        SuiteParams {
            setting: self.setting,
            n: self.n,
            len: self.len,
            realizations: self.realizations,
            max_lag: self.max_lag,
            density: self.density,
            burn_in: self.burn_in,
            seed: derive_seed(self.seed, &task, 0),
        }
    }
}

/// Writes `contents` through a temporary sibling and a rename so readers
/// never observe a half-written file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub series: String,
    pub truth: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub setting: Setting,
    pub n: usize,
    pub len: usize,
    pub max_lag: usize,
    pub density: f64,
    pub burn_in: usize,
    pub master_seed: u64,
    pub datasets: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one series CSV and truth JSON per realization plus `manifest.json`.
pub fn generate(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let params = config.suite_params();
    let datasets: Vec<LabeledDataset> = params.generate()?;
    create_dir(&config.out_dir)?;

    let mut entries = Vec::with_capacity(datasets.len());
    for (i, d) in datasets.iter().enumerate() {
        let series_name = format!("series_{i:03}.csv");
        let truth_name = format!("truth_{i:03}.json");
        let series_path = config.out_dir.join(&series_name);
        let tmp = tmp_path(&series_path);
        write_series_csv(&d.series, &tmp)?;
        fs::rename(&tmp, &series_path).map_err(|source| Error::Io {
            path: series_path.clone(),
            source,
        })?;
        write_atomic(&config.out_dir.join(&truth_name), &graph_to_json(&d.truth))?;
        entries.push(ManifestEntry {
            index: i,
            seed: params.realization_seed(i),
            series: series_name,
            truth: truth_name,
        });
    }
    let manifest = Manifest {
        setting: config.setting,
        n: config.n,
        len: config.len,
        max_lag: config.max_lag,
        density: config.density,
        burn_in: config.burn_in,
        master_seed: config.seed,
        datasets: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&config.out_dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}

/// Loads a manifest and checks that every listed file exists and parses.
pub fn load_manifest(dir: &Path) -> Result<(Manifest, Vec<LabeledDataset>)> {
    let manifest: Manifest = serde_json::from_str(&read_text(&dir.join(MANIFEST_FILE))?)?;
    let datasets = manifest
        .datasets
        .iter()
        .map(|e| {
            Ok(LabeledDataset {
                series: read_series_csv(dir.join(&e.series))?,
                truth: graph_from_json(&read_text(&dir.join(&e.truth))?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, datasets))
}

/// Metric document: `{window: {...}, summary: {...}, lag0_scored}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub window: F1Result,
    pub summary: F1Result,
    /// Whether predicted lag-0 edges were scored (only when truth has any).
    pub lag0_scored: bool,
}

impl MetricsDoc {
    pub fn new(predicted: &WindowGraph, truth: &WindowGraph) -> Result<Self> {
        let GraphScores { window, summary } = score(predicted, truth)?;
        Ok(Self {
            window,
            summary,
            lag0_scored: truth.has_instantaneous_edges(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub input: String,
    pub method: Method,
    pub discoverer: DiscovererConfig,
    pub alpha: f64,
    pub vcdf: Option<VcdfConfig>,
    pub edges: usize,
    pub wall_clock_seconds: f64,
}

pub const GRAPH_FILE: &str = "graph.json";
pub const STABILITY_FILE: &str = "stability.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const RUN_FILE: &str = "run.json";

#[derive(Clone, Debug)]
pub struct DiscoverRequest {
    pub input: PathBuf,
    pub method: Method,
    pub discoverer: DiscovererConfig,
    pub alpha: f64,
    pub vcdf: Option<VcdfConfig>,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct DiscoverOutput {
    pub graph: WindowGraph,
    pub metrics: Option<MetricsDoc>,
    pub metadata: RunMetadata,
}

/// Runs one discovery. All inputs are read and the computation finished
/// before anything is written, so failures leave no partial outputs.
pub fn discover(req: &DiscoverRequest) -> Result<DiscoverOutput> {
    if let Some(v) = &req.vcdf {
        v.validate()?;
    }
    let series = read_series_csv(&req.input)?;
    let truth = req
        .truth
        .as_ref()
        .map(|p| graph_from_json(&read_text(p)?))
        .transpose()?;
    let base = build_discoverer(req.method, req.discoverer, req.alpha)?;

    let start = Instant::now();
    let (graph, report) = match &req.vcdf {
        Some(cfg) => {
            let out = run_vcdf(&series, base.as_ref(), cfg)?;
            (out.graph, Some(out.report))
        }
        None => (base.discover(&series)?, None),
    };
    let seconds = start.elapsed().as_secs_f64();
    let metrics = truth
        .as_ref()
        .map(|t| MetricsDoc::new(&graph, t))
        .transpose()?;
    let metadata = RunMetadata {
        input: req.input.display().to_string(),
        method: req.method,
        discoverer: req.discoverer,
        alpha: req.alpha,
        vcdf: req.vcdf,
        edges: graph.len(),
        wall_clock_seconds: seconds,
    };

    create_dir(&req.out_dir)?;
    write_atomic(&req.out_dir.join(GRAPH_FILE), &graph_to_json(&graph))?;
    if let Some(report) = &report {
        write_atomic(
            &req.out_dir.join(STABILITY_FILE),
            &stability_report_to_json(report),
        )?;
    }
    if let Some(m) = &metrics {
        write_atomic(&req.out_dir.join(METRICS_FILE), &pretty(m)?)?;
    }
    write_atomic(&req.out_dir.join(RUN_FILE), &pretty(&metadata)?)?;
    Ok(DiscoverOutput {
        graph,
        metrics,
        metadata,
    })
}

/// Scores a predicted graph file against a truth graph file.
pub fn evaluate_files(predicted: &Path, truth: &Path) -> Result<MetricsDoc> {
    let pred = graph_from_json(&read_text(predicted)?)?;
    let truth = graph_from_json(&read_text(truth)?)?;
    MetricsDoc::new(&pred, &truth)
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Characteristics,
    Lengths,
    Runtime,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Characteristics => "characteristics",
            Preset::Lengths => "lengths",
            Preset::Runtime => "runtime",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "characteristics" => Ok(Preset::Characteristics),
            "lengths" => Ok(Preset::Lengths),
            "runtime" => Ok(Preset::Runtime),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected characteristics, lengths or runtime)"
            ))),
        }
    }
}

/// A base method, optionally wrapped in consensus filtering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub method: Method,
    pub vcdf: bool,
}

impl Variant {
    pub const BASE_VARLINGAM: Variant = Variant {
        method: Method::VarLingam,
        vcdf: false,
    };
    pub const VCDF_VARLINGAM: Variant = Variant {
        method: Method::VarLingam,
        vcdf: true,
    };
    pub const BASE_LAGREG: Variant = Variant {
        method: Method::LagReg,
        vcdf: false,
    };
    pub const VCDF_LAGREG: Variant = Variant {
        method: Method::LagReg,
        vcdf: true,
    };

    pub fn label(&self) -> String {
        if self.vcdf {
            format!("vcdf-{}", self.method)
        } else {
            self.method.to_string()
        }
    }
}

/// Knobs shared by every cell of a benchmark preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub preset: Preset,
    pub seed: u64,
    pub n: usize,
    pub realizations: usize,
    pub max_lag: usize,
    pub density: f64,
    pub burn_in: usize,
    pub alpha: f64,
    pub varlingam: DiscovererConfig,
    pub lagreg: DiscovererConfig,
    pub vcdf_varlingam: VcdfConfig,
    pub vcdf_lagreg: VcdfConfig,
    pub settings: Vec<Setting>,
    pub lengths: Vec<usize>,
    pub variants: Vec<Variant>,
    /// Realizations run concurrently when true. Timing presets run serially.
    pub parallel: bool,
}

impl BenchConfig {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        let all = vec![
            Variant::BASE_VARLINGAM,
            Variant::VCDF_VARLINGAM,
            Variant::BASE_LAGREG,
            Variant::VCDF_LAGREG,
        ];
        let (settings, lengths, variants, realizations, parallel) = match preset {
            Preset::Characteristics => (Setting::ALL.to_vec(), vec![1000], all, 10, true),
            Preset::Lengths => (vec![Setting::Linear], vec![250, 1000, 2000], all, 10, true),
            Preset::Runtime => (
                vec![Setting::Linear],
                vec![250, 500, 1000, 2000],
                vec![Variant::BASE_VARLINGAM, Variant::VCDF_VARLINGAM],
                3,
                false,
            ),
        };
        Self {
            preset,
            seed,
            n: 15,
            realizations,
            max_lag: DEFAULT_MAX_LAG,
            density: DEFAULT_DENSITY,
            burn_in: DEFAULT_BURN_IN,
            alpha: DEFAULT_LAGREG_ALPHA,
            varlingam: Method::VarLingam.default_config(),
            lagreg: Method::LagReg.default_config(),
            vcdf_varlingam: VcdfConfig::for_method(Method::VarLingam),
            vcdf_lagreg: VcdfConfig::for_method(Method::LagReg),
            settings,
            lengths,
            variants,
            parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        self.varlingam.validate()?;
        self.lagreg.validate()?;
        self.vcdf_varlingam.validate()?;
        self.vcdf_lagreg.validate()
    }

    /// Non-fatal notes about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.n != 15 {
            w.push(format!(
                "n = {} differs from the reference scale n = 15; absolute F1 levels will shift",
                self.n
            ));
        }
        w
    }

    fn suite(&self, setting: Setting, len: usize) -> SuiteParams {
        let task = format!("bench/{setting}/n{}/T{len}", self.n);
        SuiteParams {
            setting,
            n: self.n,
            len,
            realizations: self.realizations,
            max_lag: self.max_lag,
            density: self.density,
            burn_in: self.burn_in,
            seed: derive_seed(self.seed, &task, 0),
        }
    }

    fn discoverer_config(&self, method: Method) -> DiscovererConfig {
        match method {
            Method::VarLingam => self.varlingam,
            Method::LagReg => self.lagreg,
        }
    }

    fn vcdf_config(&self, method: Method) -> VcdfConfig {
        match method {
            Method::VarLingam => self.vcdf_varlingam,
            Method::LagReg => self.vcdf_lagreg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub setting: Setting,
    pub len: usize,
    pub method: String,
    pub window: AggregateStats,
    pub summary: AggregateStats,
    /// Wall-clock seconds per run.
    pub seconds: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, setting: Setting, len: usize, variant: Variant) -> Option<&BenchRow> {
        let label = variant.label();
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.len == len && r.method == label)
    }
}

struct CellResult {
    scores: GraphScores,
    seconds: f64,
}

fn run_variant(
    config: &BenchConfig,
    variant: Variant,
    data: &LabeledDataset,
) -> Result<CellResult> {
    let base = build_discoverer(
        variant.method,
        config.discoverer_config(variant.method),
        config.alpha,
    )?;
    let start = Instant::now();
    let graph = if variant.vcdf {
        run_vcdf(
            &data.series,
            base.as_ref(),
            &config.vcdf_config(variant.method),
        )?
        .graph
    } else {
        base.discover(&data.series)?
    };
    let seconds = start.elapsed().as_secs_f64();
    Ok(CellResult {
        scores: score(&graph, &data.truth)?,
        seconds,
    })
}

/// Runs every (setting, length, variant) cell of the preset. Each
/// (setting, length) pair shares one dataset suite across variants.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut rows = Vec::new();
    for &setting in &config.settings {
        for &len in &config.lengths {
            let suite = config.suite(setting, len);
            let per_realization = |i: usize| -> Result<Vec<CellResult>> {
                let data = suite.generate_one(i)?;
                config
                    .variants
                    .iter()
                    .map(|&v| run_variant(config, v, &data))
                    .collect()
            };
            let cells: Vec<Vec<CellResult>> = if config.parallel {
                (0..config.realizations)
                    .into_par_iter()
                    .map(per_realization)
                    .collect::<Result<_>>()?
            } else {
                (0..config.realizations)
                    .map(per_realization)
                    .collect::<Result<_>>()?
            };
            for (vi, variant) in config.variants.iter().enumerate() {
                let window: Vec<F1Result> = cells.iter().map(|c| c[vi].scores.window).collect();
                let summary: Vec<F1Result> = cells.iter().map(|c| c[vi].scores.summary).collect();
                let seconds: Vec<f64> = cells.iter().map(|c| c[vi].seconds).collect();
                rows.push(BenchRow {
                    setting,
                    len,
                    method: variant.label(),
                    window: aggregate(&window)?,
                    summary: aggregate(&summary)?,
                    seconds: MeanStd::of(&seconds)?,
                });
            }
        }
    }
    Ok(BenchReport {
        config: config.clone(),
        rows,
    })
}

pub fn bench_report_to_json(report: &BenchReport) -> Result<String> {
    pretty(report)
}

pub fn bench_report_from_json(text: &str) -> Result<BenchReport> {
    let report: BenchReport = serde_json::from_str(text)?;
    report.config.validate()?;
    Ok(report)
}

/// Aligned text table with `mean ± std` cells.
pub fn render_table(report: &BenchReport) -> String {
    let header = [
        "Setting",
        "T",
        "Method",
        "Window F1",
        "Summary F1",
        "Seconds",
    ];
    let body: Vec<[String; 6]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.setting.to_string(),
                r.len.to_string(),
                r.method.clone(),
                format!("{:.2} ± {:.2}", r.window.f1.mean, r.window.f1.std),
                format!("{:.2} ± {:.2}", r.summary.f1.mean, r.summary.f1.std),
                format!("{:.3}", r.seconds.mean),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "preset: {}  seed: {}  n: {}  realizations: {}",
        report.config.preset.as_str(),
        report.config.seed,
        report.config.n,
        report.config.realizations
    );
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            // numeric columns right-aligned
            if i == 1 || i >= 3 {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            } else {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(&header.map(String::from)));
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for row in &body {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

pub const BENCH_JSON_FILE: &str = "bench.json";
pub const BENCH_TABLE_FILE: &str = "bench.txt";

/// Runs a preset and writes `bench.json` and `bench.txt` into `out_dir`.
pub fn bench_to_dir(config: &BenchConfig, out_dir: &Path) -> Result<BenchReport> {
    let report = run_bench(config)?;
    create_dir(out_dir)?;
    write_atomic(
        &out_dir.join(BENCH_JSON_FILE),
        &bench_report_to_json(&report)?,
    )?;
    write_atomic(&out_dir.join(BENCH_TABLE_FILE), &render_table(&report))?;
    Ok(report)
}

/// Ratio of mean consensus time to mean base time at each length.
pub fn runtime_ratios(report: &BenchReport, method: Method) -> Vec<(usize, f64)> {
    let base = Variant {
        method,
        vcdf: false,
    };
    let wrapped = Variant { method, vcdf: true };
    let mut out = Vec::new();
    for &setting in &report.config.settings {
        for &len in &report.config.lengths {
            if let (Some(b), Some(v)) = (
                report.row(setting, len, base),
                report.row(setting, len, wrapped),
            ) {
                out.push((len, v.seconds.mean / b.seconds.mean));
            }
        }
    }
    out
}

/// Convenience for callers that already hold a series in memory.
pub fn discover_series(
    series: &MultivariateSeries,
    method: Method,
    discoverer: DiscovererConfig,
    alpha: f64,
    vcdf: Option<&VcdfConfig>,
) -> Result<WindowGraph> {
    let base = build_discoverer(method, discoverer, alpha)?;
    match vcdf {
        Some(cfg) => Ok(run_vcdf(series, base.as_ref(), cfg)?.graph),
        None => base.discover(series),
    }
}
