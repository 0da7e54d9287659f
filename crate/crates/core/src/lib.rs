//! Consensus-validated causal discovery for multivariate time series.
//!
//! A base method ([`discovery::VarLingam`] or [`discovery::LaggedRegression`])
//! is run on the full series and on `k` blocked training folds; edges whose
//! effect estimates flip sign or vary too much across folds are removed
//! ([`consensus::run_vcdf`]). Synthetic benchmarks with known structure
//! ([`synthgen`]) and window/summary F1 scoring ([`evaluation`]) support
//! end-to-end experiments ([`harness`]).

pub mod consensus;
pub mod discovery;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod harness;
mod linalg;
pub mod series;
pub mod synthgen;

pub use consensus::{run_vcdf, StabilityReport, VcdfConfig};
pub use discovery::{BaseDiscoverer, DiscovererConfig, LaggedRegression, Method, VarLingam};
pub use error::{Error, Result};
pub use graph::{summarize, EdgeKey, SummaryGraph, WindowGraph};
pub use series::MultivariateSeries;
