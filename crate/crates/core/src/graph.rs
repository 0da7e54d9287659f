//! Window and summary causal graphs.
//!
//! A [`WindowGraph`] stores lag-specific weighted edges keyed by
//! `(cause, effect, lag)`. Variables are identified by column index; names
//! live on the series. A [`SummaryGraph`] collapses all lags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub cause: usize,
    pub effect: usize,
    pub lag: usize,
}

impl EdgeKey {
    pub fn new(cause: usize, effect: usize, lag: usize) -> Self {
        Self { cause, effect, lag }
    }
}

impl std::fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {} (lag {})", self.cause, self.effect, self.lag)
    }
}

/// Lag-indexed weighted directed graph over `n` variables.
///
/// Invariants, enforced on every construction path:
/// - indices are `< n` and lags are `<= max_lag`;
/// - weights are finite and nonzero (a zero relation is an absent edge);
/// - the lag-0 subgraph is acyclic.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowGraph {
    n: usize,
    max_lag: usize,
    edges: BTreeMap<EdgeKey, f64>,
}

impl WindowGraph {
    pub fn empty(n: usize, max_lag: usize) -> Self {
        Self {
            n,
            max_lag,
            edges: BTreeMap::new(),
        }
    }

    pub fn from_edges<I>(n: usize, max_lag: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (EdgeKey, f64)>,
    {
        let mut map = BTreeMap::new();
        for (key, weight) in edges {
            if key.cause >= n || key.effect >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {key} references a variable outside 0..{n}"
                )));
            }
            if key.lag > max_lag {
                return Err(Error::InvalidGraph(format!(
                    "edge {key} exceeds max_lag {max_lag}"
                )));
            }
            if !weight.is_finite() || weight == 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "edge {key} has weight {weight}; weights must be finite and nonzero"
                )));
            }
            if key.lag == 0 && key.cause == key.effect {
                return Err(Error::InvalidGraph(format!(
                    "instantaneous self-loop on variable {}",
                    key.cause
                )));
            }
            if map.insert(key, weight).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge {key}")));
            }
        }
        if let Some(cycle) = find_instantaneous_cycle(n, map.keys().copied()) {
            let path: Vec<String> = cycle.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidGraph(format!(
                "lag-0 edges contain the cycle {}",
                path.join(" -> ")
            )));
        }
        Ok(Self {
            n,
            max_lag,
            edges: map,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges in ascending `(cause, effect, lag)` order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, f64)> + '_ {
        self.edges.iter().map(|(k, w)| (*k, *w))
    }

    pub fn keys(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.keys().copied()
    }

    pub fn weight(&self, key: &EdgeKey) -> Option<f64> {
        self.edges.get(key).copied()
    }

    pub fn contains(&self, key: &EdgeKey) -> bool {
        self.edges.contains_key(key)
    }

    pub fn has_instantaneous_edges(&self) -> bool {
        self.edges.keys().any(|k| k.lag == 0)
    }

    /// Keeps only edges for which `keep` returns true. Any subset of a valid
    /// graph is valid, so this cannot fail.
    pub fn retain(&mut self, mut keep: impl FnMut(&EdgeKey, f64) -> bool) {
        self.edges.retain(|k, w| keep(k, *w));
    }

    /// Replaces edge weights. A new weight of exactly zero removes the edge.
    pub fn map_weights(&mut self, mut f: impl FnMut(&EdgeKey, f64) -> f64) -> Result<()> {
        for (k, w) in self.edges.iter_mut() {
            let new = f(k, *w);
            if !new.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge {k} mapped to weight {new}"
                )));
            }
            *w = new;
        }
        self.edges.retain(|_, w| *w != 0.0);
        Ok(())
    }

    /// Relabels variables: old variable `v` becomes `mapping[v]`.
    pub fn relabel(&self, mapping: &[usize]) -> Result<Self> {
        if mapping.len() != self.n {
            return Err(Error::Mismatch(format!(
                "relabel mapping has {} entries for {} variables",
                mapping.len(),
                self.n
            )));
        }
        Self::from_edges(
            self.n,
            self.max_lag,
            self.edges()
                .map(|(k, w)| (EdgeKey::new(mapping[k.cause], mapping[k.effect], k.lag), w)),
        )
    }
}

/// Lag-aggregated directed graph: `(i, j)` present iff `i` affects `j` at
/// some lag.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SummaryGraph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl SummaryGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, cause: usize, effect: usize) -> bool {
        self.edges.contains(&(cause, effect))
    }
}

pub fn summarize(window: &WindowGraph) -> SummaryGraph {
    SummaryGraph {
        n: window.n(),
        edges: window.keys().map(|k| (k.cause, k.effect)).collect(),
    }
}

/// Returns one directed cycle among lag-0 edges, closed (first == last), if any.
fn find_instantaneous_cycle(n: usize, keys: impl Iterator<Item = EdgeKey>) -> Option<Vec<usize>> {
    let mut children = vec![Vec::new(); n];
    for k in keys.filter(|k| k.lag == 0) {
        children[k.cause].push(k.effect);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    let mut parent = vec![usize::MAX; n];

    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child position)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
            if let Some(&child) = children[node].get(*pos) {
                *pos += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        parent[child] = node;
                        stack.push((child, 0));
                    }
                    Mark::Active => {
                        let mut cycle = vec![node];
                        let mut cur = node;
                        while cur != child {
                            cur = parent[cur];
                            cycle.push(cur);
                        }
                        cycle.reverse();
                        cycle.push(child);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    n: usize,
    max_lag: usize,
    edges: Vec<EdgeDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    cause: usize,
    effect: usize,
    lag: usize,
    weight: f64,
}

/// Serializes a graph to its canonical JSON text: edges sorted by
/// `(cause, effect, lag)`, weights printed with 17 significant digits.
pub fn graph_to_json(window: &WindowGraph) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\n  \"n\": {},\n  \"max_lag\": {},\n  \"edges\": [",
        window.n, window.max_lag
    );
    for (i, (k, w)) in window.edges().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        let _ = write!(
            out,
            "    {{\"cause\": {}, \"effect\": {}, \"lag\": {}, \"weight\": {w:.16e}}}",
            k.cause, k.effect, k.lag
        );
    }
    if !window.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

pub fn graph_from_json(text: &str) -> Result<WindowGraph> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    WindowGraph::from_edges(
        doc.n,
        doc.max_lag,
        doc.edges
            .into_iter()
            .map(|e| (EdgeKey::new(e.cause, e.effect, e.lag), e.weight)),
    )
}
