//! Filtered networks: minimum spanning tree, planar maximally filtered
//! graph and bootstrap threshold networks.

mod mst;
mod planarity;
mod pmfg;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub(crate) use mst::prim_edges;
pub use mst::{mst, mst_prim, DisjointSets};
pub use planarity::{is_planar, PlanarityTester};
pub use pmfg::pmfg;

use crate::bootstrap::BootstrapTally;
use crate::error::{Error, Result};

/// Unordered node pair stored as `(i, j)` with `i < j`.
pub type Link = (usize, usize);

pub(crate) fn link(a: usize, b: usize) -> Link {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Undirected simple graph over `0..n_nodes`, edges kept sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeNetwork {
    n_nodes: usize,
    edges: Vec<Link>,
    weights: Option<Vec<f64>>,
}

impl EdgeNetwork {
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = Link>) -> Result<Self> {
        Self::build(n_nodes, edges.into_iter().map(|e| (e, None)))
    }

    pub fn with_weights(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (Link, f64)>,
    ) -> Result<Self> {
        Self::build(n_nodes, edges.into_iter().map(|(e, w)| (e, Some(w))))
    }

    fn build(n_nodes: usize, edges: impl Iterator<Item = (Link, Option<f64>)>) -> Result<Self> {
        let mut items: Vec<(Link, Option<f64>)> = Vec::new();
        for ((a, b), w) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
            }
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) outside {n_nodes} nodes"
                )));
            }
            items.push((link(a, b), w));
        }
        items.sort_by_key(|&(e, _)| e);
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge {:?}",
                w[0].0
            )));
        }
        let weighted = items.iter().all(|(_, w)| w.is_some()) && !items.is_empty();
        let weights = weighted.then(|| items.iter().map(|(_, w)| w.unwrap()).collect());
        Ok(EdgeNetwork {
            n_nodes,
            edges: items.into_iter().map(|(e, _)| e).collect(),
            weights,
        })
    }

    pub fn empty(n_nodes: usize) -> Self {
        EdgeNetwork {
            n_nodes,
            edges: Vec::new(),
            weights: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Link] {
        &self.edges
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&link(a, b)).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn non_isolated_count(&self) -> usize {
        self.degrees().iter().filter(|&&d| d > 0).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_nodes == 0 {
            return true;
        }
        let mut sets = DisjointSets::new(self.n_nodes);
        let mut parts = self.n_nodes;
        for &(a, b) in &self.edges {
            if sets.union(a, b) {
                parts -= 1;
            }
        }
        parts == 1
    }

    pub fn is_acyclic(&self) -> bool {
        let mut sets = DisjointSets::new(self.n_nodes);
        self.edges.iter().all(|&(a, b)| sets.union(a, b))
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n_nodes && self.is_acyclic()
    }

    pub fn is_planar(&self) -> bool {
        is_planar(self.n_nodes, &self.edges)
    }

    /// Number of edges present in both networks.
    pub fn common_edges(&self, other: &EdgeNetwork) -> usize {
        self.edges
            .iter()
            .filter(|e| other.contains(e.0, e.1))
            .count()
    }

    pub fn is_subgraph_of(&self, other: &EdgeNetwork) -> bool {
        self.common_edges(other) == self.edges.len()
    }

    pub fn summary(&self) -> NetworkSummary {
        NetworkSummary {
            nodes: self.n_nodes,
            non_isolated_nodes: self.non_isolated_count(),
            edges: self.n_edges(),
            is_tree: self.is_tree(),
            is_planar: self.is_planar(),
        }
    }

    /// Edge-list CSV `element_i,element_j,weight`. Unweighted networks
    /// leave the weight column empty.
    pub fn write_csv(&self, elements: &[String], mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "element_i,element_j,weight")?;
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            match &self.weights {
                Some(w) => writeln!(out, "{},{},{:.16e}", elements[a], elements[b], w[k])?,
                None => writeln!(out, "{},{},", elements[a], elements[b])?,
            }
        }
        Ok(())
    }
}

/// JSON summary written next to every network dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub non_isolated_nodes: usize,
    pub edges: usize,
    pub is_tree: bool,
    pub is_planar: bool,
}

/// How a bootstrap value is compared with the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Keep links with count `> threshold`.
    #[default]
    Strict,
    /// Keep links with count `>= threshold`.
    Inclusive,
}

impl ThresholdRule {
    pub fn keeps(self, count: u32, threshold: u32) -> bool {
        match self {
            ThresholdRule::Strict => count > threshold,
            ThresholdRule::Inclusive => count >= threshold,
        }
    }
}

/// Links of a tally whose bootstrap value passes the threshold, over all
/// `n` nodes (isolated nodes included).
pub fn threshold_network(
    tally: &BootstrapTally,
    threshold: u32,
    rule: ThresholdRule,
) -> Result<EdgeNetwork> {
    if threshold > tally.replicas() {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} exceeds replica count {}",
            tally.replicas()
        )));
    }
    EdgeNetwork::with_weights(
        tally.n_nodes(),
        tally
            .iter()
            .filter(|&(_, c)| rule.keeps(c, threshold))
            .map(|(l, c)| (l, c as f64)),
    )
}

/// Descending thresholds `B - s, B - 2s, ..., s` with `s = B / 50`
/// (20 for 1000 replicas), at least 1.
pub fn default_thresholds(replicas: u32) -> Vec<u32> {
    let step = ((f64::from(replicas) / 50.0).round() as u32).max(1);
    let mut out = Vec::new();
    let mut t = replicas.saturating_sub(step);
    while t >= step {
        out.push(t);
        t -= step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::BootstrapMethod;

    #[test]
    fn default_threshold_range() {
        let t = default_thresholds(1000);
        assert_eq!(t.first(), Some(&980));
        assert_eq!(t.last(), Some(&20));
        assert_eq!(t.len(), 49);
        let t = default_thresholds(200);
        assert_eq!((t[0], t[1], *t.last().unwrap()), (196, 192, 4));
        assert_eq!(default_thresholds(10), (1..=9).rev().collect::<Vec<_>>());
        assert!(default_thresholds(1).is_empty());
    }

    #[test]
    fn network_validation() {
        assert!(EdgeNetwork::new(3, [(0, 0)]).is_err());
        assert!(EdgeNetwork::new(3, [(0, 3)]).is_err());
        assert!(EdgeNetwork::new(3, [(0, 1), (1, 0)]).is_err());
        let net = EdgeNetwork::new(4, [(2, 1), (0, 1)]).unwrap();
        assert_eq!(net.edges(), [(0, 1), (1, 2)]);
        assert!(net.contains(2, 1));
        assert!(!net.contains(0, 2));
        assert_eq!(net.non_isolated_count(), 3);
        assert!(!net.is_connected());
        assert!(net.is_acyclic());
        assert!(!net.is_tree());
        let tree = EdgeNetwork::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(tree.is_tree() && tree.is_connected());
        let tri = EdgeNetwork::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(!tri.is_acyclic());
        assert!(tree.is_subgraph_of(&tri));
    }

    #[test]
    fn edge_list_csv() {
        let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let net = EdgeNetwork::with_weights(3, [((1, 0), 0.5)]).unwrap();
        let mut out = Vec::new();
        net.write_csv(&names, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "element_i,element_j,weight\nA,B,5.0000000000000000e-1\n"
        );
    }

    fn tally() -> BootstrapTally {
        BootstrapTally::from_counts(
            BootstrapMethod::Row,
            10,
            5,
            [((0, 1), 10), ((1, 2), 9), ((2, 3), 4), ((0, 2), 1)],
        )
        .unwrap()
    }

    #[test]
    fn threshold_boundaries() {
        let t = tally();
        assert_eq!(
            threshold_network(&t, 10, ThresholdRule::Strict)
                .unwrap()
                .n_edges(),
            0
        );
        assert_eq!(
            threshold_network(&t, 9, ThresholdRule::Strict)
                .unwrap()
                .edges(),
            [(0, 1)]
        );
        assert_eq!(
            threshold_network(&t, 10, ThresholdRule::Inclusive)
                .unwrap()
                .edges(),
            [(0, 1)]
        );
        let all = threshold_network(&t, 0, ThresholdRule::Strict).unwrap();
        assert_eq!(all.n_edges(), 4);
        assert_eq!(all.n_nodes(), 5);
        assert_eq!(all.non_isolated_count(), 4);
        assert!(threshold_network(&t, 11, ThresholdRule::Strict).is_err());
    }

    #[test]
    fn threshold_networks_are_nested() {
        let t = tally();
        for lo in 0..=10 {
            for hi in lo..=10 {
                let a = threshold_network(&t, lo, ThresholdRule::Strict).unwrap();
                let b = threshold_network(&t, hi, ThresholdRule::Strict).unwrap();
                assert!(b.is_subgraph_of(&a));
            }
        }
    }
}
