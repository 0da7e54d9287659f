//! Structural accuracy against a ground-truth window graph.
//!
//! Edge universe: when the truth graph has no lag-0 edges, predicted lag-0
//! edges are ignored by both window and summary scoring; otherwise they
//! count like any other edge. Weights never matter.

use std::collections::BTreeSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{summarize, EdgeKey, WindowGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Result {
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    pub f1: f64,
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
}

impl F1Result {
    /// Scores from raw counts. Empty prediction against empty truth is a
    /// perfect score.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        if tp + fp + fn_ == 0 {
            return Self {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                true_positives: 0,
                false_positives: 0,
                false_negatives: 0,
            };
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // harmonic mean of precision and recall, from counts to round once
        let f1 = if tp > 0 {
            (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
        }
    }
}

fn score_sets<T: Ord + Hash>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> F1Result {
    let tp = predicted.intersection(truth).count();
    F1Result::from_counts(tp, predicted.len() - tp, truth.len() - tp)
}

fn check_compatible(predicted: &WindowGraph, truth: &WindowGraph) -> Result<()> {
    if predicted.n() != truth.n() {
        return Err(Error::Mismatch(format!(
            "predicted graph has {} variables, truth has {}",
            predicted.n(),
            truth.n()
        )));
    }
    Ok(())
}

/// Predicted edges that take part in scoring against `truth`.
fn scored_prediction<'a>(
    predicted: &'a WindowGraph,
    truth: &WindowGraph,
) -> impl Iterator<Item = EdgeKey> + 'a {
    let include_lag0 = truth.has_instantaneous_edges();
    predicted.keys().filter(move |k| include_lag0 || k.lag > 0)
}

/// Lag-specific F1: an edge matches iff `(cause, effect, lag)` agree.
pub fn window_f1(predicted: &WindowGraph, truth: &WindowGraph) -> Result<F1Result> {
    check_compatible(predicted, truth)?;
    let pred: BTreeSet<EdgeKey> = scored_prediction(predicted, truth).collect();
    let truth_set: BTreeSet<EdgeKey> = truth.keys().collect();
    Ok(score_sets(&pred, &truth_set))
}

/// Lag-aggregated F1 on `(cause, effect)` pairs.
pub fn summary_f1(predicted: &WindowGraph, truth: &WindowGraph) -> Result<F1Result> {
    check_compatible(predicted, truth)?;
    let pred: BTreeSet<(usize, usize)> = scored_prediction(predicted, truth)
        .map(|k| (k.cause, k.effect))
        .collect();
    let truth_set = summarize(truth).edges;
    Ok(score_sets(&pred, &truth_set))
}

/// Window and summary scores together, in the metric output layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphScores {
    pub window: F1Result,
    pub summary: F1Result,
}

pub fn score(predicted: &WindowGraph, truth: &WindowGraph) -> Result<GraphScores> {
    Ok(GraphScores {
        window: window_f1(predicted, truth)?,
        summary: summary_f1(predicted, truth)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(
                "cannot summarize an empty list".into(),
            ));
        }
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
        Ok(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub count: usize,
}

/// Mean and population standard deviation of each metric. Input order does
/// not affect the result.
pub fn aggregate(results: &[F1Result]) -> Result<AggregateStats> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no results to aggregate".into()));
    }
    // sorting makes the floating-point sums independent of input order
    let sorted = |f: fn(&F1Result) -> f64| {
        let mut v: Vec<f64> = results.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let stats = |values: Vec<f64>| {
        if values.len() == 1 {
            Ok(MeanStd {
                mean: values[0],
                std: 0.0,
            })
        } else {
            MeanStd::of(&values)
        }
    };
    Ok(AggregateStats {
        precision: stats(sorted(|r| r.precision))?,
        recall: stats(sorted(|r| r.recall))?,
        f1: stats(sorted(|r| r.f1))?,
        count: results.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, max_lag: usize, keys: &[(usize, usize, usize)]) -> WindowGraph {
        WindowGraph::from_edges(
            n,
            max_lag,
            keys.iter().map(|&(c, e, l)| (EdgeKey::new(c, e, l), 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn identical_graphs_score_one() {
        let g = graph(3, 2, &[(0, 1, 1), (1, 2, 2)]);
        assert_eq!(window_f1(&g, &g).unwrap().f1, 1.0);
        assert_eq!(summary_f1(&g, &g).unwrap().f1, 1.0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let truth = graph(3, 2, &[(0, 1, 1)]);
        let r = window_f1(&WindowGraph::empty(3, 2), &truth).unwrap();
        assert_eq!((r.f1, r.false_negatives), (0.0, 1));
    }

    #[test]
    fn both_empty_scores_one() {
        let e = WindowGraph::empty(3, 1);
        let r = window_f1(&e, &e).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn partial_overlap_counts() {
        let pred = graph(3, 2, &[(0, 1, 1), (1, 2, 1)]);
        let truth = graph(3, 2, &[(0, 1, 1), (2, 0, 2)]);
        let r = window_f1(&pred, &truth).unwrap();
        assert_eq!(
            (r.true_positives, r.false_positives, r.false_negatives),
            (1, 1, 1)
        );
        assert!((r.f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn summary_ignores_lag_mismatch() {
        let truth = graph(2, 3, &[(0, 1, 1), (0, 1, 2)]);
        let pred = graph(2, 3, &[(0, 1, 3)]);
        assert_eq!(window_f1(&pred, &truth).unwrap().true_positives, 0);
        let s = summary_f1(&pred, &truth).unwrap();
        assert_eq!(s.true_positives, 1);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn disjoint_pairs_score_zero() {
        let truth = graph(3, 1, &[(0, 1, 1)]);
        let pred = graph(3, 1, &[(2, 1, 1)]);
        assert_eq!(summary_f1(&pred, &truth).unwrap().f1, 0.0);
    }

    #[test]
    fn lag0_predictions_ignored_without_lag0_truth() {
        let truth = graph(3, 1, &[(0, 1, 1)]);
        let pred = graph(3, 1, &[(0, 1, 1), (1, 2, 0)]);
        assert_eq!(window_f1(&pred, &truth).unwrap().f1, 1.0);
        assert_eq!(summary_f1(&pred, &truth).unwrap().f1, 1.0);
        let truth = graph(3, 1, &[(0, 1, 1), (0, 2, 0)]);
        assert_eq!(window_f1(&pred, &truth).unwrap().false_positives, 1);
    }

    #[test]
    fn variable_count_mismatch() {
        assert!(window_f1(&WindowGraph::empty(2, 1), &WindowGraph::empty(3, 1)).is_err());
        assert!(summary_f1(&WindowGraph::empty(2, 1), &WindowGraph::empty(3, 1)).is_err());
    }

    #[test]
    fn aggregate_mean_and_population_std() {
        let a = F1Result::from_counts(2, 3, 3); // f1 = 0.4
        let b = F1Result::from_counts(3, 2, 2); // f1 = 0.6
        let s = aggregate(&[a, b]).unwrap();
        assert!((s.f1.mean - 0.5).abs() < 1e-12);
        assert!((s.f1.std - 0.1).abs() < 1e-12);
        assert_eq!(s.count, 2);
        let single = aggregate(&[a]).unwrap();
        assert_eq!((single.f1.mean, single.f1.std), (a.f1, 0.0));
        assert!(aggregate(&[]).is_err());
        assert_eq!(aggregate(&[b, a]).unwrap(), s);
    }
}
