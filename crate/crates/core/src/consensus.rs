//! Consensus validation of a base method's edges over blocked folds.
//!
//! The series is cut into `k` contiguous validation blocks. For each block
//! the base method is re-run on the remaining rows (left and right segments
//! concatenated in temporal order). Every edge of the full-sample graph `G0`
//! is then scored by
//!
//! - directional consistency `C`: the fraction of folds whose estimate has
//!   the same sign as the full-sample estimate `r0`, and
//! - relative variability `V = std(fold estimates) / (|r0| + epsilon)`,
//!
//! and removed when `C < tau_c` or `V > tau_v`. An edge missing from a fold
//! graph contributes the estimate 0 for that fold.

use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::discovery::{BaseDiscoverer, Method};
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, WindowGraph};
use crate::series::MultivariateSeries;

/// Magnitudes below this have sign 0.
pub const SIGN_ZERO_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcdfConfig {
    pub k: usize,
    pub tau_c: f64,
    /// `+inf` disables the variability filter; serialized as `null`.
    #[serde(serialize_with = "inf_as_null", deserialize_with = "null_as_inf")]
    pub tau_v: f64,
    pub w: f64,
    pub epsilon: f64,
}

fn inf_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_none()
    } else {
        s.serialize_f64(*v)
    }
}

fn null_as_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Default for VcdfConfig {
    fn default() -> Self {
        Self::varlingam_profile()
    }
}

impl VcdfConfig {
    /// `k = 5, tau_c = 0.4, tau_v = 0.4, w = 0`.
    pub fn varlingam_profile() -> Self {
        Self {
            k: 5,
            tau_c: 0.4,
            tau_v: 0.4,
            w: 0.0,
            epsilon: 1e-8,
        }
    }

    /// Stricter consistency profile (`tau_c = 0.7`) for test-based methods.
    pub fn strict_profile() -> Self {
        Self {
            tau_c: 0.7,
            ..Self::varlingam_profile()
        }
    }

    pub fn for_method(method: Method) -> Self {
        match method {
            Method::VarLingam => Self::varlingam_profile(),
            Method::LagReg => Self::strict_profile(),
        }
    }

    /// Thresholds that keep every edge: `tau_c = 0`, `tau_v = +inf`, `w = 0`.
    pub fn vacuous(k: usize) -> Self {
        Self {
            k,
            tau_c: 0.0,
            tau_v: f64::INFINITY,
            w: 0.0,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.tau_c) {
            return Err(Error::Config(format!(
                "tau_c must lie in [0, 1], got {}",
                self.tau_c
            )));
        }
        if self.tau_v.is_nan() || self.tau_v < 0.0 {
            return Err(Error::Config(format!(
                "tau_v must be non-negative, got {}",
                self.tau_v
            )));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Config(format!(
                "w must lie in [0, 1], got {}",
                self.w
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn keeps(&self, consistency: f64, variability: f64) -> bool {
        consistency >= self.tau_c && variability <= self.tau_v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldBlock {
    pub validation: Range<usize>,
    /// Complement of `validation`, at most two ranges, in temporal order.
    pub training: Vec<Range<usize>>,
}

impl FoldBlock {
    pub fn training_len(&self) -> usize {
        self.training.iter().map(|r| r.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub len: usize,
    pub blocks: Vec<FoldBlock>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.blocks.len()
    }
}

/// Block `b` validates rows `[floor(b T / k), floor((b + 1) T / k))`.
pub fn make_fold_plan(len: usize, k: usize) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > len {
        return Err(Error::Config(format!(
            "k = {k} exceeds series length {len}"
        )));
    }
    let bound = |b: usize| ((b as u128 * len as u128) / k as u128) as usize;
    let blocks = (0..k)
        .map(|b| {
            let validation = bound(b)..bound(b + 1);
            let training = [0..validation.start, validation.end..len]
                .into_iter()
                .filter(|r| !r.is_empty())
                .collect();
            FoldBlock {
                validation,
                training,
            }
        })
        .collect();
    Ok(FoldPlan { len, blocks })
}

/// Training rows of fold `m`: both complement segments joined with no gap
/// handling at the junction.
pub fn extract_training(
    series: &MultivariateSeries,
    plan: &FoldPlan,
    m: usize,
) -> Result<MultivariateSeries> {
    if plan.len != series.len() {
        return Err(Error::Mismatch(format!(
            "fold plan covers {} rows, series has {}",
            plan.len,
            series.len()
        )));
    }
    let block = plan
        .blocks
        .get(m)
        .ok_or_else(|| Error::Config(format!("fold {m} out of range 0..{}", plan.k())))?;
    series.select_rows(&block.training)
}

pub fn sign(x: f64) -> i8 {
    if x.abs() < SIGN_ZERO_BAND {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Fraction of fold estimates whose sign equals the sign of `r0`.
pub fn directional_consistency(r0: f64, folds: &[f64]) -> f64 {
    if folds.is_empty() {
        return 0.0;
    }
    let s0 = sign(r0);
    let agree = folds.iter().filter(|&&r| sign(r) == s0).count();
    agree as f64 / folds.len() as f64
}

/// Population standard deviation of the fold estimates over `|r0| + epsilon`.
pub fn relative_variability(r0: f64, folds: &[f64], epsilon: f64) -> Result<f64> {
    if folds.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "variability needs at least 2 fold estimates, got {}",
            folds.len()
        )));
    }
    let k = folds.len() as f64;
    let mean = folds.iter().sum::<f64>() / k;
    let var = folds.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / k;
    Ok(var.sqrt() / (r0.abs() + epsilon))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeStability {
    pub cause: usize,
    pub effect: usize,
    pub lag: usize,
    pub r0: f64,
    pub folds: Vec<f64>,
    pub c: f64,
    pub v: f64,
    pub kept: bool,
}

impl EdgeStability {
    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.cause, self.effect, self.lag)
    }

    pub fn fold_mean(&self) -> f64 {
        self.folds.iter().sum::<f64>() / self.folds.len() as f64
    }
}

/// Per-edge audit trail of one consensus run, sorted by edge key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: VcdfConfig,
    pub edges: Vec<EdgeStability>,
}

impl StabilityReport {
    pub fn validate(&self) -> Result<()> {
        let k = self.config.k;
        for (idx, e) in self.edges.iter().enumerate() {
            if e.folds.len() != k {
                return Err(Error::InvalidGraph(format!(
                    "report edge {} has {} fold estimates, expected {k}",
                    e.key(),
                    e.folds.len()
                )));
            }
            if e.kept != self.config.keeps(e.c, e.v) {
                return Err(Error::InvalidGraph(format!(
                    "report edge {} has kept = {} inconsistent with its scores",
                    e.key(),
                    e.kept
                )));
            }
            if idx > 0 && self.edges[idx - 1].key() >= e.key() {
                return Err(Error::InvalidGraph(
                    "report edges are not strictly sorted".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn stability_report_to_json(report: &StabilityReport) -> String {
    let mut text =
        serde_json::to_string_pretty(report).expect("report serialization is infallible");
    text.push('\n');
    text
}

pub fn stability_report_from_json(text: &str) -> Result<StabilityReport> {
    let report: StabilityReport = serde_json::from_str(text)?;
    report.config.validate()?;
    report.validate()?;
    Ok(report)
}

/// Result of [`run_vcdf`].
#[derive(Clone, Debug)]
pub struct VcdfOutcome {
    pub graph: WindowGraph,
    pub report: StabilityReport,
    /// Full-sample graph before filtering.
    pub full: WindowGraph,
}

/// Scores every edge of `full` against the fold graphs and builds the report.
pub fn assess(
    full: &WindowGraph,
    fold_graphs: &[WindowGraph],
    cfg: &VcdfConfig,
) -> Result<StabilityReport> {
    cfg.validate()?;
    if fold_graphs.len() != cfg.k {
        return Err(Error::Mismatch(format!(
            "{} fold graphs for k = {}",
            fold_graphs.len(),
            cfg.k
        )));
    }
    let edges = full
        .edges()
        .map(|(key, r0)| {
            let folds: Vec<f64> = fold_graphs
                .iter()
                .map(|g| g.weight(&key).unwrap_or(0.0))
                .collect();
            let c = directional_consistency(r0, &folds);
            let v = relative_variability(r0, &folds, cfg.epsilon)?;
            Ok(EdgeStability {
                cause: key.cause,
                effect: key.effect,
                lag: key.lag,
                r0,
                folds,
                c,
                v,
                kept: cfg.keeps(c, v),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport {
        config: *cfg,
        edges,
    })
}

/// Applies a report to its full-sample graph: drops unkept edges and, when
/// `w > 0`, moves surviving weights toward the fold mean.
pub fn apply_report(full: &WindowGraph, report: &StabilityReport) -> Result<WindowGraph> {
    let mut graph = full.clone();
    let verdicts: std::collections::BTreeMap<EdgeKey, &EdgeStability> =
        report.edges.iter().map(|e| (e.key(), e)).collect();
    graph.retain(|k, _| verdicts.get(k).is_some_and(|e| e.kept));
    let w = report.config.w;
    if w > 0.0 {
        graph.map_weights(|k, r0| {
            let mean = verdicts[k].fold_mean();
            (1.0 - w) * r0 + w * mean
        })?;
    }
    Ok(graph)
}

/// Runs the base method on the full series and on each fold's training
/// rows, then filters the full-sample graph by cross-fold stability.
///
/// Folds run sequentially in index order.
pub fn run_vcdf(
    series: &MultivariateSeries,
    base: &dyn BaseDiscoverer,
    cfg: &VcdfConfig,
) -> Result<VcdfOutcome> {
    cfg.validate()?;
    let plan = make_fold_plan(series.len(), cfg.k)?;
    let full = base.discover(series)?;
    let fold_graphs = (0..cfg.k)
        .map(|m| {
            let train = extract_training(series, &plan, m)?;
            base.discover(&train).map_err(|e| Error::Fold {
                fold: m,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = assess(&full, &fold_graphs, cfg)?;
    let graph = apply_report(&full, &report)?;
    Ok(VcdfOutcome {
        graph,
        report,
        full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_plan_equal_division() {
        let plan = make_fold_plan(10, 5).unwrap();
        let v: Vec<_> = plan.blocks.iter().map(|b| b.validation.clone()).collect();
        assert_eq!(v, vec![0..2, 2..4, 4..6, 6..8, 8..10]);
    }

    #[test]
    fn fold_plan_floor_formula() {
        let plan = make_fold_plan(11, 5).unwrap();
        let v: Vec<_> = plan.blocks.iter().map(|b| b.validation.clone()).collect();
        assert_eq!(v, vec![0..2, 2..4, 4..6, 6..8, 8..11]);
    }

    #[test]
    fn fold_plan_singletons() {
        let plan = make_fold_plan(5, 5).unwrap();
        assert!(plan
            .blocks
            .iter()
            .all(|b| b.validation.len() == 1 && b.training_len() == 4));
    }

    #[test]
    fn fold_plan_rejects_bad_k() {
        assert!(make_fold_plan(4, 5).is_err());
        assert!(make_fold_plan(10, 1).is_err());
    }

    #[test]
    fn training_rows() {
        let s =
            MultivariateSeries::with_default_names(1, (0..10).map(f64::from).collect()).unwrap();
        let plan = make_fold_plan(10, 5).unwrap();
        let t0 = extract_training(&s, &plan, 0).unwrap();
        assert_eq!(t0.values(), &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let t2 = extract_training(&s, &plan, 2).unwrap();
        assert_eq!(t2.values(), &[0.0, 1.0, 2.0, 3.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(extract_training(&s, &plan, 5).is_err());
    }

    #[test]
    fn consistency_examples() {
        assert_eq!(
            directional_consistency(0.5, &[0.4, 0.6, 0.3, 0.5, 0.45]),
            1.0
        );
        assert!((directional_consistency(0.5, &[0.4, -0.1, 0.3, -0.2, 0.5]) - 0.6).abs() < 1e-15);
        assert_eq!(directional_consistency(0.5, &[0.0; 5]), 0.0);
        assert_eq!(directional_consistency(1e-13, &[0.0, 1e-14]), 1.0);
    }

    #[test]
    fn variability_examples() {
        assert_eq!(relative_variability(0.5, &[0.5; 5], 1e-8).unwrap(), 0.0);
        let v = relative_variability(1.0, &[0.9, 1.1], 1e-8).unwrap();
        assert!((v - 0.1 / (1.0 + 1e-8)).abs() < 1e-12);
        let v = relative_variability(1e-9, &[0.2, -0.2], 1e-8).unwrap();
        assert!((v - 0.2 / 1.1e-8).abs() / v < 1e-12);
        assert!(relative_variability(1.0, &[1.0], 1e-8).is_err());
    }

    #[test]
    fn config_validation() {
        VcdfConfig::default().validate().unwrap();
        VcdfConfig::vacuous(3).validate().unwrap();
        assert!(VcdfConfig {
            k: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VcdfConfig {
            tau_c: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VcdfConfig {
            tau_v: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VcdfConfig {
            w: 2.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(VcdfConfig {
            epsilon: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(VcdfConfig::for_method(Method::LagReg).tau_c, 0.7);
    }

    #[test]
    fn infinite_tau_v_serializes_as_null() {
        let text = serde_json::to_string(&VcdfConfig::vacuous(5)).unwrap();
        assert!(text.contains("\"tau_v\":null"), "{text}");
        let back: VcdfConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.tau_v, f64::INFINITY);
    }

    #[test]
    fn empty_report_document() {
        let report = StabilityReport {
            config: VcdfConfig::default(),
            edges: vec![],
        };
        let text = stability_report_to_json(&report);
        assert!(text.contains("\"edges\": []"), "{text}");
        assert_eq!(stability_report_from_json(&text).unwrap(), report);
    }

    #[test]
    fn report_rejects_inconsistent_kept_flag() {
        let report = StabilityReport {
            config: VcdfConfig::default(),
            edges: vec![EdgeStability {
                cause: 0,
                effect: 1,
                lag: 1,
                r0: 0.5,
                folds: vec![0.0; 5],
                c: 0.0,
                v: 0.0,
                kept: true,
            }],
        };
        assert!(stability_report_from_json(&stability_report_to_json(&report)).is_err());
    }

    #[test]
    fn absent_in_every_fold_is_removed() {
        let key = EdgeKey::new(0, 1, 1);
        let full = WindowGraph::from_edges(2, 1, [(key, 0.7)]).unwrap();
        let folds = vec![WindowGraph::empty(2, 1); 5];
        let cfg = VcdfConfig {
            tau_c: 0.01,
            tau_v: f64::INFINITY,
            ..Default::default()
        };
        let report = assess(&full, &folds, &cfg).unwrap();
        assert_eq!(report.edges[0].c, 0.0);
        assert!(!report.edges[0].kept);
        assert!(apply_report(&full, &report).unwrap().is_empty());
    }

    #[test]
    fn refinement_interpolates() {
        let key = EdgeKey::new(0, 1, 1);
        let full = WindowGraph::from_edges(2, 1, [(key, 1.0)]).unwrap();
        let folds: Vec<_> = [0.8, 0.9, 1.0, 1.1, 0.7]
            .iter()
            .map(|&w| WindowGraph::from_edges(2, 1, [(key, w)]).unwrap())
            .collect();
        let cfg = VcdfConfig {
            w: 1.0,
            ..VcdfConfig::vacuous(5)
        };
        let report = assess(&full, &folds, &cfg).unwrap();
        let g = apply_report(&full, &report).unwrap();
        assert!((g.weight(&key).unwrap() - 0.9).abs() < 1e-12);
        let cfg = VcdfConfig {
            w: 0.5,
            ..VcdfConfig::vacuous(5)
        };
        let report = assess(&full, &folds, &cfg).unwrap();
        let g = apply_report(&full, &report).unwrap();
        assert!((g.weight(&key).unwrap() - 0.95).abs() < 1e-12);
    }
}
