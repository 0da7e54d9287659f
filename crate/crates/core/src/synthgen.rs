//! Synthetic structural causal models with known window graphs.
//!
//! A model has sparse lagged edges (lags `1..=p`, no self-lags), a sparse
//! acyclic instantaneous layer, a noise law, an optional `tanh` link and an
//! optional linear trend:
//!
//! ```text
//! x_t(j) = f( sum_lagged c * x_{t-tau}(i) + sum_inst c * x_t(i) ) + slope * t + e_t(j)
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, WindowGraph};
use crate::series::{default_names, MultivariateSeries};

pub const DEFAULT_MAX_LAG: usize = 3;
pub const DEFAULT_DENSITY: f64 = 0.15;
pub const DEFAULT_BURN_IN: usize = 200;

const COEF_MIN: f64 = 0.1;
const COEF_MAX: f64 = 0.9;
const TREND_MIN: f64 = 0.001;
const TREND_MAX: f64 = 0.01;
const MAX_RESAMPLES: usize = 100;

/// The four benchmark data characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Linear,
    Nonlinear,
    NonGaussian,
    Trended,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::Linear,
        Setting::Nonlinear,
        Setting::NonGaussian,
        Setting::Trended,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Linear => "linear",
            Setting::Nonlinear => "nonlinear",
            Setting::NonGaussian => "non_gaussian",
            Setting::Trended => "trended",
        }
    }

    fn noise(&self) -> Noise {
        match self {
            Setting::NonGaussian => Noise::Laplace,
            _ => Noise::Uniform,
        }
    }

    fn nonlinearity(&self) -> Nonlinearity {
        match self {
            Setting::Nonlinear => Nonlinearity::Tanh,
            _ => Nonlinearity::None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|setting| setting.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown setting {s:?} (expected linear, nonlinear, non_gaussian or trended)"
                ))
            })
    }
}

/// Unit-variance disturbance laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Gaussian,
    Uniform,
    Laplace,
}

impl Noise {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
            Noise::Laplace => {
                // inverse CDF with scale 1/sqrt(2) for unit variance
                let u: f64 = rng.random_range(-0.5..0.5);
                -std::f64::consts::FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    None,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmEdge {
    pub cause: usize,
    pub effect: usize,
    pub lag: usize,
    pub coefficient: f64,
}

impl ScmEdge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.cause, self.effect, self.lag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub n: usize,
    pub max_lag: usize,
    pub lag_edges: Vec<ScmEdge>,
    pub inst_edges: Vec<ScmEdge>,
    pub noise: Noise,
    pub nonlinearity: Nonlinearity,
    pub trend_slope: f64,
    pub seed: u64,
}

impl ScmSpec {
    /// Checks structural invariants, including the stationarity guard.
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.max_lag < 1 {
            return Err(Error::Config("model needs n >= 1 and max_lag >= 1".into()));
        }
        for e in self.lag_edges.iter().chain(&self.inst_edges) {
            let a = e.coefficient.abs();
            if !(COEF_MIN..=COEF_MAX).contains(&a) {
                return Err(Error::Config(format!(
                    "coefficient {} on {} outside [{COEF_MIN}, {COEF_MAX}] in magnitude",
                    e.coefficient,
                    e.key()
                )));
            }
        }
        if self.lag_edges.iter().any(|e| e.lag == 0) || self.inst_edges.iter().any(|e| e.lag != 0) {
            return Err(Error::Config(
                "lagged edges need lag >= 1, instantaneous edges lag 0".into(),
            ));
        }
        // acyclicity, ranges and uniqueness
        self.truth_graph()?;
        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::Config(format!(
                "companion spectral radius {rho} is not below 1"
            )));
        }
        Ok(())
    }

    /// Ground-truth window graph carrying the model coefficients.
    pub fn truth_graph(&self) -> Result<WindowGraph> {
        WindowGraph::from_edges(
            self.n,
            self.max_lag,
            self.lag_edges
                .iter()
                .chain(&self.inst_edges)
                .map(|e| (e.key(), e.coefficient)),
        )
    }

    fn structural_matrices(&self) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.n;
        let mut b0 = DMatrix::zeros(n, n);
        for e in &self.inst_edges {
            b0[(e.effect, e.cause)] = e.coefficient;
        }
        let mut lagged = vec![DMatrix::zeros(n, n); self.max_lag];
        for e in &self.lag_edges {
            lagged[e.lag - 1][(e.effect, e.cause)] = e.coefficient;
        }
        (b0, lagged)
    }

    /// Spectral radius of the companion matrix of the reduced-form lag
    /// polynomial `(I - B0)^{-1} B_tau`, linearized at the origin.
    pub fn spectral_radius(&self) -> Result<f64> {
        let n = self.n;
        let p = self.max_lag;
        let (b0, lagged) = self.structural_matrices();
        let inv = (DMatrix::identity(n, n) - b0)
            .try_inverse()
            .ok_or_else(|| Error::Config("I - B0 is singular".into()))?;
        let mut companion = DMatrix::zeros(n * p, n * p);
        for (tau, b) in lagged.iter().enumerate() {
            let m = &inv * b;
            companion.view_mut((0, tau * n), (n, n)).copy_from(&m);
        }
        for r in n..n * p {
            companion[(r, r - n)] = 1.0;
        }
        if companion.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        match companion.clone().try_schur(1e-12, 10_000) {
            Some(schur) => Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)),
            // QR iteration can stall on nilpotent companions
            None => gelfand_radius(companion),
        }
    }

    /// Variables in an order compatible with the instantaneous edges.
    fn instantaneous_order(&self) -> Vec<usize> {
        let n = self.n;
        let mut indeg = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for e in &self.inst_edges {
            indeg[e.effect] += 1;
            children[e.cause].push(e.effect);
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        order
    }
}

/// A simulated series with its generating graph.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub series: MultivariateSeries,
    pub truth: WindowGraph,
}

/// `rho(A) = lim ||A^m||^(1/m)`, evaluated at `m = 2^40` by repeated
/// squaring with renormalization.
fn gelfand_radius(mut a: DMatrix<f64>) -> Result<f64> {
    const SQUARINGS: i32 = 40;
    // invariant: A^(2^i) = a * exp(log_scale)
    let mut log_scale = 0.0;
    for _ in 0..SQUARINGS {
        let norm = a.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::Generator("companion powers overflowed".into()));
        }
        a /= norm;
        log_scale += norm.ln();
        a = &a * &a;
        log_scale *= 2.0;
    }
    let norm = a.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(((log_scale + norm.ln()) / 2f64.powi(SQUARINGS)).exp())
}

fn draw_coefficient<R: Rng>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(COEF_MIN..=COEF_MAX);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Samples a random stationary model for `setting`.
///
/// Lagged layer: `round(density * n * (n - 1))` distinct ordered pairs,
/// each at a uniformly drawn lag in `1..=max_lag`. Instantaneous layer:
/// `round(density / 2 * n * (n - 1) / 2)` pairs oriented along a random
/// permutation. Whole draws are rejected until the companion spectral
/// radius is below 1.
pub fn random_scm(
    n: usize,
    max_lag: usize,
    density: f64,
    setting: Setting,
    seed: u64,
) -> Result<ScmSpec> {
    if n < 2 {
        return Err(Error::Config(format!("n must be at least 2, got {n}")));
    }
    if max_lag < 1 {
        return Err(Error::Config("max_lag must be at least 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let pairs = n * (n - 1);
    let lag_count = (density * pairs as f64).round() as usize;
    let inst_count = ((density / 2.0) * (pairs / 2) as f64).round() as usize;
    if lag_count == 0 {
        return Err(Error::Generator(format!(
            "density {density} yields no edges for n = {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let lag_edges: Vec<ScmEdge> = sample(&mut rng, pairs, lag_count)
            .into_iter()
            .map(|idx| {
                let cause = idx / (n - 1);
                let mut effect = idx % (n - 1);
                if effect >= cause {
                    effect += 1;
                }
                (cause, effect)
            })
            .map(|(cause, effect)| ScmEdge {
                cause,
                effect,
                lag: rng.random_range(1..=max_lag),
                coefficient: draw_coefficient(&mut rng),
            })
            .collect();

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let upper: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();
        let inst_edges: Vec<ScmEdge> = sample(&mut rng, upper.len(), inst_count.min(upper.len()))
            .into_iter()
            .map(|idx| upper[idx])
            .map(|(a, b)| ScmEdge {
                cause: perm[a],
                effect: perm[b],
                lag: 0,
                coefficient: draw_coefficient(&mut rng),
            })
            .collect();

        let trend_slope = match setting {
            Setting::Trended => draw_trend(&mut rng),
            _ => 0.0,
        };
        let spec = ScmSpec {
            n,
            max_lag,
            lag_edges,
            inst_edges,
            noise: setting.noise(),
            nonlinearity: setting.nonlinearity(),
            trend_slope,
            seed,
        };
        if matches!(spec.spectral_radius(), Ok(rho) if rho < 1.0) {
            return Ok(spec);
        }
    }
    Err(Error::Generator(format!(
        "no stationary model found after {MAX_RESAMPLES} draws (n = {n}, max_lag = {max_lag}, density = {density})"
    )))
}

fn draw_trend<R: Rng>(rng: &mut R) -> f64 {
    let m = rng.random_range(TREND_MIN..=TREND_MAX);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Simulates `len` observations after discarding `burn_in` steps. Pre-sample
/// values are zero; the trend term uses the absolute step index.
pub fn simulate(spec: &ScmSpec, len: usize, burn_in: usize) -> Result<LabeledDataset> {
    spec.validate()?;
    if len < 10 * spec.max_lag {
        return Err(Error::Config(format!(
            "length {len} is below 10 * max_lag = {}",
            10 * spec.max_lag
        )));
    }
    let n = spec.n;
    let truth = spec.truth_graph()?;
    let order = spec.instantaneous_order();

    let mut lag_parents: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for e in &spec.lag_edges {
        lag_parents[e.effect].push((e.cause, e.lag, e.coefficient));
    }
    let mut inst_parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in &spec.inst_edges {
        inst_parents[e.effect].push((e.cause, e.coefficient));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);

    let total = burn_in + len;
    let mut x = vec![0.0; total * n];
    let mut noise = vec![0.0; n];
    for t in 0..total {
        for e in noise.iter_mut() {
            *e = spec.noise.sample(&mut rng);
        }
        for &j in &order {
            let mut s = 0.0;
            for &(i, lag, c) in &lag_parents[j] {
                if t >= lag {
                    s += c * x[(t - lag) * n + i];
                }
            }
            for &(i, c) in &inst_parents[j] {
                s += c * x[t * n + i];
            }
            let f = match spec.nonlinearity {
                Nonlinearity::None => s,
                Nonlinearity::Tanh => s.tanh(),
            };
            let v = f + spec.trend_slope * t as f64 + noise[j];
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "simulation overflowed at step {t}, variable {j}"
                )));
            }
            x[t * n + j] = v;
        }
    }
    let series = MultivariateSeries::new(default_names(n), x.split_off(burn_in * n))?;
    Ok(LabeledDataset { series, truth })
}

/// Generator knobs for a suite of independent realizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub setting: Setting,
    pub n: usize,
    pub len: usize,
    pub realizations: usize,
    pub max_lag: usize,
    pub density: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl SuiteParams {
    pub fn new(setting: Setting, n: usize, len: usize, realizations: usize, seed: u64) -> Self {
        Self {
            setting,
            n,
            len,
            realizations,
            max_lag: DEFAULT_MAX_LAG,
            density: DEFAULT_DENSITY,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }

    /// Seed of realization `index`.
    pub fn realization_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    pub fn generate_one(&self, index: usize) -> Result<LabeledDataset> {
        let spec = random_scm(
            self.n,
            self.max_lag,
            self.density,
            self.setting,
            self.realization_seed(index),
        )?;
        simulate(&spec, self.len, self.burn_in)
    }

    pub fn generate(&self) -> Result<Vec<LabeledDataset>> {
        if self.realizations < 1 {
            return Err(Error::Config("at least one realization is required".into()));
        }
        (0..self.realizations)
            .map(|i| self.generate_one(i))
            .collect()
    }
}

/// Suite with default lag order, density and burn-in.
pub fn benchmark_suite(
    setting: Setting,
    n: usize,
    len: usize,
    realizations: usize,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    SuiteParams::new(setting, n, len, realizations, seed).generate()
}
