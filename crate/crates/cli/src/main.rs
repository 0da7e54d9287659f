use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use vcdf::discovery::{DiscovererConfig, Method};
use vcdf::harness::{self, BenchConfig, DiscoverRequest, ExperimentConfig, Preset};
use vcdf::synthgen::Setting;
use vcdf::{Error, VcdfConfig};

/// Consensus-validated causal discovery for multivariate time series.
#[derive(Parser, Debug)]
#[command(name = "vcdf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate labeled benchmark datasets.
    Generate(GenerateArgs),
    /// Run a base method (optionally with consensus filtering) on a CSV series.
    Discover(DiscoverArgs),
    /// Score a predicted graph against a ground-truth graph.
    Evaluate(EvaluateArgs),
    /// Run a benchmark preset: characteristics, lengths or runtime.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// JSON experiment config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// linear, nonlinear, non_gaussian or trended.
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    /// varlingam or lagreg.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    max_lag: Option<usize>,
    /// Minimum absolute weight for a reported edge.
    #[arg(long)]
    prune: Option<f64>,
    /// Significance level for lagreg.
    #[arg(long)]
    alpha: Option<f64>,
    /// Enable consensus filtering.
    #[arg(long)]
    vcdf: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau_c: Option<f64>,
    /// Variability threshold; "inf" disables it.
    #[arg(long)]
    tau_v: Option<f64>,
    /// Refinement weight in [0, 1].
    #[arg(long)]
    w: Option<f64>,
}

#[derive(Args, Debug)]
struct DiscoverArgs {
    /// Series CSV with a header row.
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth graph JSON; enables metrics.json.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    predicted: PathBuf,
    truth: PathBuf,
    /// Write metrics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated series lengths.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
}

/// Failure category, mapped to the process exit code.
enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Usage(e.into())
        } else {
            Failure::Compute(e.into())
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn load_experiment_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut cfg = load_experiment_config(args.config.as_deref()).map_err(usage)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out {
        cfg.out_dir = v;
    }
    if let Some(v) = args.setting {
        cfg.setting = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.len {
        cfg.len = v;
    }
    if let Some(v) = args.realizations {
        cfg.realizations = v;
    }
    if let Some(v) = args.max_lag {
        cfg.max_lag = v;
    }
    let manifest = harness::generate(&cfg)?;
    eprintln!(
        "wrote {} datasets to {}",
        manifest.datasets.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn resolve_method(
    cfg: &ExperimentConfig,
    m: &MethodArgs,
) -> Result<(Method, DiscovererConfig, f64, Option<VcdfConfig>), Error> {
    let method = m.method.unwrap_or(cfg.method);
    let defaults = method.default_config();
    let max_lag = m.max_lag.unwrap_or(cfg.max_lag);
    let prune = m
        .prune
        .or(if method == cfg.method {
            cfg.prune
        } else {
            None
        })
        .unwrap_or(defaults.prune_threshold);
    let discoverer = DiscovererConfig::new(max_lag, prune)?;
    let alpha = m.alpha.unwrap_or(cfg.alpha);

    let tuned = m.k.is_some() || m.tau_c.is_some() || m.tau_v.is_some() || m.w.is_some();
    let vcdf = if m.vcdf || tuned || cfg.vcdf.is_some() {
        let mut v = cfg.vcdf.unwrap_or_else(|| VcdfConfig::for_method(method));
        if let Some(x) = m.k {
            v.k = x;
        }
        if let Some(x) = m.tau_c {
            v.tau_c = x;
        }
        if let Some(x) = m.tau_v {
            v.tau_v = x;
        }
        if let Some(x) = m.w {
            v.w = x;
        }
        v.validate()?;
        Some(v)
    } else {
        None
    };
    Ok((method, discoverer, alpha, vcdf))
}

fn cmd_discover(args: DiscoverArgs) -> Result<(), Failure> {
    let cfg = load_experiment_config(args.config.as_deref()).map_err(usage)?;
    let (method, discoverer, alpha, vcdf) = resolve_method(&cfg, &args.method)?;
    let req = DiscoverRequest {
        input: args.input,
        method,
        discoverer,
        alpha,
        vcdf,
        truth: args.truth,
        out_dir: args.out.unwrap_or(cfg.out_dir),
    };
    let out = harness::discover(&req)?;
    eprintln!(
        "{} edges in {:.3}s -> {}",
        out.graph.len(),
        out.metadata.wall_clock_seconds,
        req.out_dir.display()
    );
    if let Some(m) = out.metrics {
        eprintln!(
            "window F1 {:.3}  summary F1 {:.3}",
            m.window.f1, m.summary.f1
        );
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let metrics = harness::evaluate_files(&args.predicted, &args.truth)?;
    let mut text =
        serde_json::to_string_pretty(&metrics).map_err(|e| Failure::Compute(e.into()))?;
    text.push('\n');
    match args.out {
        Some(path) => fs::write(&path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Compute)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let preset: Preset = args.preset.parse()?;
    let mut cfg = BenchConfig::preset(preset, args.seed.unwrap_or(0));
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.realizations {
        cfg.realizations = v;
    }
    if let Some(v) = args.lengths {
        cfg.lengths = v;
    }
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("bench_out"));
    let report = harness::bench_to_dir(&cfg, &out)?;
    print!("{}", harness::render_table(&report));
    if preset == Preset::Runtime {
        for (len, ratio) in harness::runtime_ratios(&report, Method::VarLingam) {
            println!("T = {len}: consensus / base time = {ratio:.2}");
        }
    }
    Ok(())
}

/// Library errors already embed their causes in `Display`.
fn report(e: &anyhow::Error) {
    if e.downcast_ref::<Error>().is_some() {
        eprintln!("error: {e}");
    } else {
        eprintln!("error: {e:#}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            report(&e);
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            report(&e);
            ExitCode::from(3)
        }
    }
}
