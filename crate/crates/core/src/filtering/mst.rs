use std::cmp::Ordering;

use super::{EdgeNetwork, Link};
use crate::correlation::DistanceMatrix;

/// Union-find with union by size and path halving.
#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false when already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Total order on candidate edges: distance, then `(i, j)`.
fn edge_order(a: (f64, Link), b: (f64, Link)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Minimum spanning tree by Kruskal's algorithm. Ties are broken by the
/// ascending `(distance, i, j)` order, which makes the tree unique.
pub fn mst(distance: &DistanceMatrix) -> EdgeNetwork {
    let n = distance.n();
    let mut candidates: Vec<(f64, Link)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            candidates.push((distance.get(i, j), (i, j)));
        }
    }
    candidates.sort_unstable_by(|a, b| edge_order(*a, *b));

    let mut sets = DisjointSets::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (d, (i, j)) in candidates {
        if sets.union(i, j) {
            tree.push(((i, j), d));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    EdgeNetwork::with_weights(n, tree).expect("spanning tree edges are valid")
}

/// Minimum spanning tree by Prim's node-growing algorithm, `O(n^2)`.
/// Produces the same tree as [`mst`] under the same tie-break.
pub fn mst_prim(distance: &DistanceMatrix) -> EdgeNetwork {
    let n = distance.n();
    EdgeNetwork::with_weights(n, prim_edges(n, |i, j| distance.get(i, j)))
        .expect("spanning tree edges are valid")
}

pub(crate) fn prim_edges(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<(Link, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    // best crossing edge per outside node
    let mut best: Vec<(f64, Link)> = vec![(f64::INFINITY, (usize::MAX, usize::MAX)); n];
    let mut tree = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = (dist(current, v), super::link(current, v));
            if edge_order(cand, best[v]) == Ordering::Less {
                best[v] = cand;
            }
            if pick == usize::MAX || edge_order(best[v], best[pick]) == Ordering::Less {
                pick = v;
            }
        }
        in_tree[pick] = true;
        tree.push((best[pick].1, best[pick].0));
        current = pick;
    }
    tree
}
