//! Base causal-discovery methods.
//!
//! Two implementations of [`BaseDiscoverer`] are provided:
//!
//! - [`VarLingam`]: a VAR(p) fit by least squares, DirectLiNGAM on the VAR
//!   residuals for the instantaneous structure `B0`, and lagged structural
//!   matrices `B_tau = (I - B0) M_tau`.
//! - [`LaggedRegression`]: per-target OLS on all lagged regressors, keeping
//!   coefficients whose t-statistic clears a two-sided normal critical value.
//!
//! Both are deterministic for a fixed series and configuration.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, WindowGraph};
use crate::linalg::ols;
use crate::series::MultivariateSeries;

/// B0 entries smaller than this are treated as exact zeros.
const B0_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscovererConfig {
    pub max_lag: usize,
    /// Minimum absolute weight for an edge to be emitted.
    pub prune_threshold: f64,
}

impl DiscovererConfig {
    pub fn new(max_lag: usize, prune_threshold: f64) -> Result<Self> {
        let cfg = Self {
            max_lag,
            prune_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_lag < 1 {
            return Err(Error::Config("max_lag must be at least 1".into()));
        }
        if !self.prune_threshold.is_finite() || self.prune_threshold < 0.0 {
            return Err(Error::Config(format!(
                "prune_threshold must be finite and non-negative, got {}",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

impl Default for DiscovererConfig {
    fn default() -> Self {
        Self {
            max_lag: 3,
            prune_threshold: 0.03,
        }
    }
}

/// A causal-discovery method that maps a series to a window graph.
pub trait BaseDiscoverer: Send + Sync {
    fn id(&self) -> &'static str;

    fn max_lag(&self) -> usize;

    fn discover(&self, series: &MultivariateSeries) -> Result<WindowGraph>;
}

/// String identifiers accepted on the command line and in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "varlingam")]
    VarLingam,
    #[serde(rename = "lagreg")]
    LagReg,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::VarLingam => "varlingam",
            Method::LagReg => "lagreg",
        }
    }

    pub fn default_config(&self) -> DiscovererConfig {
        match self {
            Method::VarLingam => DiscovererConfig::default(),
            Method::LagReg => DiscovererConfig {
                max_lag: 3,
                prune_threshold: 0.0,
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varlingam" => Ok(Method::VarLingam),
            "lagreg" => Ok(Method::LagReg),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected \"varlingam\" or \"lagreg\")"
            ))),
        }
    }
}

pub const DEFAULT_LAGREG_ALPHA: f64 = 0.01;

/// Instantiates the discoverer named by `method`. `alpha` is only used by
/// the lagged-regression method.
pub fn build_discoverer(
    method: Method,
    config: DiscovererConfig,
    alpha: f64,
) -> Result<Box<dyn BaseDiscoverer>> {
    Ok(match method {
        Method::VarLingam => Box::new(VarLingam::new(config)?),
        Method::LagReg => Box::new(LaggedRegression::new(config, alpha)?),
    })
}

/// Reduced-form VAR(p) estimate.
#[derive(Clone, Debug)]
pub struct VarFit {
    /// `M_1..M_p`; entry `[j, i]` is the coefficient of `x_{t-tau}(i)` in the
    /// equation for `x_t(j)`.
    pub lag_matrices: Vec<DMatrix<f64>>,
    /// `(T - p) x n` residuals in temporal order.
    pub residuals: DMatrix<f64>,
    pub intercept: DVector<f64>,
}

/// Builds the `[1, x_{t-1}, ..., x_{t-p}]` design and the `x_t` targets for
/// `t = p..T`.
fn lagged_design(series: &MultivariateSeries, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = series.n_vars();
    let t_len = series.len();
    if t_len <= n * p + p + 1 {
        return Err(Error::InsufficientData(format!(
            "{t_len} time steps cannot support a lag-{p} regression on {n} variables \
             (need more than {})",
            n * p + p + 1
        )));
    }
    let rows = t_len - p;
    let k = 1 + n * p;
    let mut x = DMatrix::zeros(rows, k);
    let mut y = DMatrix::zeros(rows, n);
    for r in 0..rows {
        let t = r + p;
        x[(r, 0)] = 1.0;
        for tau in 1..=p {
            let lagged = series.row(t - tau);
            for (i, v) in lagged.iter().enumerate() {
                x[(r, 1 + (tau - 1) * n + i)] = *v;
            }
        }
        for (j, v) in series.row(t).iter().enumerate() {
            y[(r, j)] = *v;
        }
    }
    Ok((x, y))
}

/// Least-squares VAR(p) fit with intercept.
pub fn fit_var(series: &MultivariateSeries, p: usize) -> Result<VarFit> {
    if p < 1 {
        return Err(Error::Config("lag order must be at least 1".into()));
    }
    let n = series.n_vars();
    let (x, y) = lagged_design(series, p)?;
    let fit = ols(&x, &y)?;
    let lag_matrices = (1..=p)
        .map(|tau| DMatrix::from_fn(n, n, |j, i| fit.coefficients[(1 + (tau - 1) * n + i, j)]))
        .collect();
    let intercept = fit.coefficients.row(0).transpose();
    Ok(VarFit {
        lag_matrices,
        residuals: fit.residuals,
        intercept,
    })
}

/// Causal order and instantaneous effects recovered from residuals.
#[derive(Clone, Debug)]
pub struct LingamOrder {
    /// Variable indices, most exogenous first.
    pub order: Vec<usize>,
    /// `n x n`; entry `[j, i]` is the instantaneous effect of `i` on `j`.
    /// Nonzero only when `i` precedes `j` in `order`.
    pub b0: DMatrix<f64>,
}

// Maximum-entropy approximation constants (log-cosh and Gaussian-moment
// contrasts).
const ENTROPY_K1: f64 = 79.047;
const ENTROPY_K2: f64 = 7.4129;
const ENTROPY_GAMMA: f64 = 0.37457;

fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Approximate differential entropy of a standardized sample.
fn entropy(u: &[f64]) -> f64 {
    let len = u.len() as f64;
    let (lc, gm) = u.iter().fold((0.0, 0.0), |(lc, gm), &v| {
        (lc + log_cosh(v), gm + v * (-0.5 * v * v).exp())
    });
    let lc = lc / len - ENTROPY_GAMMA;
    let gm = gm / len;
    (1.0 + (2.0 * std::f64::consts::PI).ln()) / 2.0 - ENTROPY_K1 * lc * lc - ENTROPY_K2 * gm * gm
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    let sd = var.sqrt();
    if !sd.is_finite() || sd <= 0.0 {
        return None;
    }
    Some(v.iter().map(|x| (x - m) / sd).collect())
}

/// Residual of `a` after regressing on `b` (both centered).
fn residual(a: &[f64], b: &[f64]) -> Vec<f64> {
    let ma = mean(a);
    let mb = mean(b);
    let (cov, var) = a.iter().zip(b).fold((0.0, 0.0), |(c, v), (x, y)| {
        (c + (x - ma) * (y - mb), v + (y - mb) * (y - mb))
    });
    let beta = if var > 0.0 { cov / var } else { 0.0 };
    a.iter().zip(b).map(|(x, y)| x - beta * y).collect()
}

/// Standardized residual of standardized `a` regressed on standardized `b`.
fn standardized_residual(a: &[f64], b: &[f64], rho: f64) -> Vec<f64> {
    let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - rho * y).collect();
    standardize(&r).unwrap_or(r)
}

/// Orders variables by exogeneity using the pairwise likelihood-ratio
/// contrast, then estimates `B0` by least squares of each variable on its
/// predecessors.
///
/// Columns are standardized for the ordering search only; `B0` is on the
/// scale of `residuals`. Exact ties go to the lowest variable index.
pub fn direct_lingam_order(residuals: &DMatrix<f64>) -> Result<LingamOrder> {
    let (rows, n) = residuals.shape();
    if n == 0 {
        return Err(Error::InsufficientData("no variables".into()));
    }
    if rows < 10 * n {
        return Err(Error::InsufficientData(format!(
            "{rows} residual rows for {n} variables; at least {} required",
            10 * n
        )));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "residual matrix contains NaN or infinity".into(),
        ));
    }

    let columns: Vec<Vec<f64>> = residuals
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut work = columns.clone();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);

    while remaining.len() > 1 {
        let std_cols: Vec<Vec<f64>> = remaining
            .iter()
            .map(|&v| {
                standardize(&work[v]).ok_or_else(|| {
                    Error::RankDeficient(format!(
                        "variable {v} has no variance left after removing earlier variables"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let h: Vec<f64> = std_cols.iter().map(|c| entropy(c)).collect();
        let m = remaining.len();
        let mut score = vec![0.0; m];
        for a in 0..m {
            for b in (a + 1)..m {
                let (xa, xb) = (&std_cols[a], &std_cols[b]);
                let rho = xa.iter().zip(xb).map(|(p, q)| p * q).sum::<f64>() / rows as f64;
                let ra_b = standardized_residual(xa, xb, rho);
                let rb_a = standardized_residual(xb, xa, rho);
                // positive when `a` -> `b` is the better-supported direction
                let diff = (h[b] + entropy(&ra_b)) - (h[a] + entropy(&rb_a));
                score[a] += diff.min(0.0).powi(2);
                score[b] += (-diff).min(0.0).powi(2);
            }
        }
        let mut best = 0;
        for c in 1..m {
            if score[c] < score[best] {
                best = c;
            }
        }
        let chosen = remaining.remove(best);
        order.push(chosen);
        let source = work[chosen].clone();
        for &v in &remaining {
            work[v] = residual(&work[v], &source);
        }
    }
    order.extend(remaining);

    let mut b0 = DMatrix::zeros(n, n);
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|x| x - m).collect()
        })
        .collect();
    for pos in 1..n {
        let target = order[pos];
        let preds = &order[..pos];
        let x = DMatrix::from_fn(rows, pos, |r, c| centered[preds[c]][r]);
        let y = DMatrix::from_column_slice(rows, 1, &centered[target]);
        let fit = ols(&x, &y)?;
        for (c, &p) in preds.iter().enumerate() {
            let v = fit.coefficients[(c, 0)];
            if v.abs() >= B0_ZERO {
                b0[(target, p)] = v;
            }
        }
    }
    Ok(LingamOrder { order, b0 })
}

/// Structural estimate produced by VAR-LiNGAM before pruning.
#[derive(Clone, Debug)]
pub struct VarLingamFit {
    pub var: VarFit,
    pub order: Vec<usize>,
    pub b0: DMatrix<f64>,
    /// `B_1..B_p`, each `(I - B0) M_tau`.
    pub lagged: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct VarLingam {
    config: DiscovererConfig,
}

impl VarLingam {
    pub fn new(config: DiscovererConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &DiscovererConfig {
        &self.config
    }

    pub fn fit(&self, series: &MultivariateSeries) -> Result<VarLingamFit> {
        let var = fit_var(series, self.config.max_lag)?;
        let LingamOrder { order, b0 } = direct_lingam_order(&var.residuals)?;
        let n = series.n_vars();
        let i_minus_b0 = DMatrix::<f64>::identity(n, n) - &b0;
        let lagged = var.lag_matrices.iter().map(|m| &i_minus_b0 * m).collect();
        Ok(VarLingamFit {
            var,
            order,
            b0,
            lagged,
        })
    }

    /// Converts a structural fit into a pruned window graph.
    pub fn graph_from_fit(&self, fit: &VarLingamFit) -> Result<WindowGraph> {
        let n = fit.b0.nrows();
        let keep = |w: f64| w != 0.0 && w.abs() >= self.config.prune_threshold;
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let w = fit.b0[(j, i)];
                if i != j && keep(w) {
                    edges.push((EdgeKey::new(i, j, 0), w));
                }
            }
        }
        for (tau, b) in fit.lagged.iter().enumerate() {
            for j in 0..n {
                for i in 0..n {
                    let w = b[(j, i)];
                    if keep(w) {
                        edges.push((EdgeKey::new(i, j, tau + 1), w));
                    }
                }
            }
        }
        WindowGraph::from_edges(n, self.config.max_lag, edges)
    }
}

impl BaseDiscoverer for VarLingam {
    fn id(&self) -> &'static str {
        Method::VarLingam.as_str()
    }

    fn max_lag(&self) -> usize {
        self.config.max_lag
    }

    fn discover(&self, series: &MultivariateSeries) -> Result<WindowGraph> {
        let fit = self.fit(series)?;
        self.graph_from_fit(&fit)
    }
}

/// Per-target lagged OLS with a t-test on each coefficient.
#[derive(Clone, Debug)]
pub struct LaggedRegression {
    config: DiscovererConfig,
    alpha: f64,
}

impl LaggedRegression {
    pub fn new(config: DiscovererConfig, alpha: f64) -> Result<Self> {
        config.validate()?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self { config, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Two-sided standard-normal critical value for `alpha`; infinite at 0.
    pub fn critical_value(&self) -> f64 {
        if self.alpha <= 0.0 {
            return f64::INFINITY;
        }
        let std_normal = Normal::standard();
        std_normal.inverse_cdf(1.0 - self.alpha / 2.0)
    }
}

impl BaseDiscoverer for LaggedRegression {
    fn id(&self) -> &'static str {
        Method::LagReg.as_str()
    }

    fn max_lag(&self) -> usize {
        self.config.max_lag
    }

    fn discover(&self, series: &MultivariateSeries) -> Result<WindowGraph> {
        let p = self.config.max_lag;
        let n = series.n_vars();
        let (x, y) = lagged_design(series, p)?;
        let fit = ols(&x, &y)?;
        let (rows, k) = x.shape();
        let dof = (rows - k) as f64;
        let crit = self.critical_value();

        let mut edges = Vec::new();
        for j in 0..n {
            let rss = fit.residuals.column(j).norm_squared();
            let sigma2 = rss / dof;
            for tau in 1..=p {
                for i in 0..n {
                    let c = 1 + (tau - 1) * n + i;
                    let coef = fit.coefficients[(c, j)];
                    let se = (sigma2 * fit.xtx_inv_diag[c]).sqrt();
                    let t_stat = if se > 0.0 {
                        coef / se
                    } else {
                        f64::INFINITY * coef.signum()
                    };
                    if coef != 0.0
                        && t_stat.abs() > crit
                        && coef.abs() >= self.config.prune_threshold
                    {
                        edges.push((EdgeKey::new(i, j, tau), coef));
                    }
                }
            }
        }
        WindowGraph::from_edges(n, p, edges)
    }
}
