//! Independent reference implementations and data builders shared by the
//! integration tests. Nothing here calls into the code under test except to
//! construct inputs.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcdf::evaluation::F1Result;
use vcdf::{EdgeKey, MultivariateSeries, WindowGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-variance uniform draw.
pub fn uniform<R: Rng>(rng: &mut R) -> f64 {
    let h = 3f64.sqrt();
    rng.random_range(-h..h)
}

pub fn series_from_rows(rows: Vec<Vec<f64>>) -> MultivariateSeries {
    let n = rows[0].len();
    MultivariateSeries::with_default_names(n, rows.into_iter().flatten().collect()).unwrap()
}

/// `x_t = phi * x_{t-1} + e_t` with uniform noise after a 500-step burn-in.
pub fn ar1(phi: f64, len: usize, seed: u64) -> MultivariateSeries {
    let mut r = rng(seed);
    let mut x = 0.0;
    let mut rows = Vec::with_capacity(len);
    for t in 0..len + 500 {
        x = phi * x + uniform(&mut r);
        if t >= 500 {
            rows.push(vec![x]);
        }
    }
    series_from_rows(rows)
}

/// Independent uniform columns.
pub fn iid(n: usize, len: usize, seed: u64) -> MultivariateSeries {
    let mut r = rng(seed);
    series_from_rows(
        (0..len)
            .map(|_| (0..n).map(|_| uniform(&mut r)).collect())
            .collect(),
    )
}

pub fn iid_matrix(n: usize, rows: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, n, |_, _| uniform(&mut r))
}

/// `x1 = e1`, `x2 = b * x1 + e2` with uniform disturbances.
pub fn lingam_pair(b: f64, rows: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let mut m = DMatrix::zeros(rows, 2);
    for t in 0..rows {
        let x1 = uniform(&mut r);
        m[(t, 0)] = x1;
        m[(t, 1)] = b * x1 + uniform(&mut r);
    }
    m
}

/// `x1 -> x2 -> x3` with coefficients `b12`, `b23`.
pub fn lingam_chain(b12: f64, b23: f64, rows: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let mut m = DMatrix::zeros(rows, 3);
    for t in 0..rows {
        let x1 = uniform(&mut r);
        let x2 = b12 * x1 + uniform(&mut r);
        let x3 = b23 * x2 + uniform(&mut r);
        m[(t, 0)] = x1;
        m[(t, 1)] = x2;
        m[(t, 2)] = x3;
    }
    m
}

/// Random window graph. Lag-0 edges, when allowed, follow a random
/// permutation so the instantaneous part is acyclic.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    max_lag: usize,
    p: f64,
    lag0: bool,
) -> WindowGraph {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut rank = vec![0; n];
    for (pos, &v) in perm.iter().enumerate() {
        rank[v] = pos;
    }
    let mut edges = Vec::new();
    for cause in 0..n {
        for effect in 0..n {
            for lag in 0..=max_lag {
                if lag == 0 && (!lag0 || rank[cause] >= rank[effect]) {
                    continue;
                }
                if rng.random_bool(p) {
                    let mag = rng.random_range(0.01..2.0);
                    let w = if rng.random_bool(0.5) { mag } else { -mag };
                    edges.push((EdgeKey::new(cause, effect, lag), w));
                }
            }
        }
    }
    WindowGraph::from_edges(n, max_lag, edges).unwrap()
}

/// F1 by scanning the whole `(cause, effect, lag)` universe.
pub fn brute_window_f1(pred: &WindowGraph, truth: &WindowGraph) -> F1Result {
    let n = truth.n();
    let max_lag = pred.max_lag().max(truth.max_lag());
    let truth_has_lag0 = (0..n).any(|c| (0..n).any(|e| truth.contains(&EdgeKey::new(c, e, 0))));
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in 0..n {
        for e in 0..n {
            for l in 0..=max_lag {
                let k = EdgeKey::new(c, e, l);
                let p = pred.contains(&k) && (l > 0 || truth_has_lag0);
                let t = truth.contains(&k);
                match (p, t) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
        }
    }
    ratios(tp, fp, fn_)
}

/// F1 on `(cause, effect)` pairs, collapsing lags by scanning.
pub fn brute_summary_f1(pred: &WindowGraph, truth: &WindowGraph) -> F1Result {
    let n = truth.n();
    let max_lag = pred.max_lag().max(truth.max_lag());
    let truth_has_lag0 = (0..n).any(|c| (0..n).any(|e| truth.contains(&EdgeKey::new(c, e, 0))));
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in 0..n {
        for e in 0..n {
            let p = (0..=max_lag)
                .any(|l| pred.contains(&EdgeKey::new(c, e, l)) && (l > 0 || truth_has_lag0));
            let t = (0..=max_lag).any(|l| truth.contains(&EdgeKey::new(c, e, l)));
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    ratios(tp, fp, fn_)
}

fn ratios(tp: usize, fp: usize, fn_: usize) -> F1Result {
    let (p, r, f1) = if tp + fp + fn_ == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        (p, r, f1)
    };
    F1Result {
        precision: p,
        recall: r,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    }
}

/// Sign with a closed zero band `(-1e-12, 1e-12)`.
fn band_sign(x: f64) -> i32 {
    if x >= 1e-12 {
        1
    } else if x <= -1e-12 {
        -1
    } else {
        0
    }
}

pub fn brute_consistency(r0: f64, folds: &[f64]) -> f64 {
    let mut hits = 0usize;
    for &f in folds {
        if band_sign(f) == band_sign(r0) {
            hits += 1;
        }
    }
    hits as f64 / folds.len() as f64
}

pub fn brute_variability(r0: f64, folds: &[f64], eps: f64) -> f64 {
    let k = folds.len() as f64;
    let mut mean = 0.0;
    for f in folds {
        mean += f / k;
    }
    let mut ss = 0.0;
    for f in folds {
        ss += (f - mean).powi(2);
    }
    (ss / k).sqrt() / (r0.abs() + eps)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn key_set(g: &WindowGraph) -> BTreeSet<EdgeKey> {
    g.keys().collect()
}

/// Counts how many seeds in `seeds` satisfy `check`.
pub fn passing_seeds(seeds: std::ops::Range<u64>, check: impl Fn(u64) -> bool) -> usize {
    seeds.filter(|&s| check(s)).count()
}

/// `(predicted, truth)` on the same variable set with independent densities
/// and lag-0 content.
pub fn random_graph_pair<R: Rng>(rng: &mut R) -> (WindowGraph, WindowGraph) {
    let n = rng.random_range(2..7);
    let max_lag = rng.random_range(1..4);
    let (pt, lt) = (rng.random_range(0.0..0.4), rng.random_bool(0.5));
    let truth = random_graph(rng, n, max_lag, pt, lt);
    let (pp, lp) = (rng.random_range(0.0..0.4), rng.random_bool(0.5));
    let pred = random_graph(rng, n, max_lag, pp, lp);
    (pred, truth)
}
