//! Left-right planarity test (Brandes' formulation of the de Fraysseix /
//! Rosenstiehl criterion). Testing only; no embedding is produced.
//!
//! The tester owns its scratch buffers so that repeated queries on graphs
//! of similar size, as in PMFG construction, do not reallocate.

use super::Link;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Interval {
    low: usize,
    high: usize,
}

impl Interval {
    const EMPTY: Interval = Interval {
        low: NONE,
        high: NONE,
    };

    fn is_empty(&self) -> bool {
        self.low == NONE && self.high == NONE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    const EMPTY: ConflictPair = ConflictPair {
        left: Interval::EMPTY,
        right: Interval::EMPTY,
    };

    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

/// Reusable left-right planarity tester.
#[derive(Debug, Default)]
pub struct PlanarityTester {
    // undirected adjacency in CSR form: (neighbour, edge id)
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    // orientation
    oriented: Vec<bool>,
    src: Vec<usize>,
    dst: Vec<usize>,
    height: Vec<usize>,
    parent_edge: Vec<usize>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<usize>,
    roots: Vec<usize>,
    // out-edges sorted by nesting depth, CSR
    out_start: Vec<usize>,
    out: Vec<usize>,
    // testing
    reference: Vec<usize>,
    lowpt_edge: Vec<usize>,
    stack_bottom: Vec<usize>,
    stack: Vec<ConflictPair>,
}

impl PlanarityTester {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether the simple graph on `0..n` with the given edges is planar.
    pub fn is_planar(&mut self, n: usize, edges: &[Link]) -> bool {
        let m = edges.len();
        if n > 2 && m > 3 * n - 6 {
            return false;
        }
        self.reset(n, edges);
        for v in 0..n {
            if self.height[v] == NONE {
                self.height[v] = 0;
                self.roots.push(v);
                self.orient(v);
            }
        }
        self.sort_out_edges(n);
        for k in 0..self.roots.len() {
            let root = self.roots[k];
            if !self.test(root) {
                return false;
            }
        }
        true
    }

    fn reset(&mut self, n: usize, edges: &[Link]) {
        let m = edges.len();
        self.adj_start.clear();
        self.adj_start.resize(n + 1, 0);
        for &(a, b) in edges {
            self.adj_start[a + 1] += 1;
            self.adj_start[b + 1] += 1;
        }
        for v in 0..n {
            self.adj_start[v + 1] += self.adj_start[v];
        }
        self.adj.clear();
        self.adj.resize(2 * m, (0, 0));
        let mut fill: Vec<usize> = self.adj_start[..n].to_vec();
        for (e, &(a, b)) in edges.iter().enumerate() {
            self.adj[fill[a]] = (b, e);
            fill[a] += 1;
            self.adj[fill[b]] = (a, e);
            fill[b] += 1;
        }

        for buf in [
            &mut self.src,
            &mut self.dst,
            &mut self.lowpt,
            &mut self.lowpt2,
            &mut self.nesting_depth,
            &mut self.reference,
            &mut self.lowpt_edge,
            &mut self.stack_bottom,
        ] {
            buf.clear();
            buf.resize(m, NONE);
        }
        self.oriented.clear();
        self.oriented.resize(m, false);
        self.height.clear();
        self.height.resize(n, NONE);
        self.parent_edge.clear();
        self.parent_edge.resize(n, NONE);
        self.roots.clear();
        self.stack.clear();
    }

    fn orient(&mut self, v: usize) {
        let e = self.parent_edge[v];
        for k in self.adj_start[v]..self.adj_start[v + 1] {
            let (w, vw) = self.adj[k];
            if self.oriented[vw] {
                continue;
            }
            self.oriented[vw] = true;
            self.src[vw] = v;
            self.dst[vw] = w;
            self.lowpt[vw] = self.height[v];
            self.lowpt2[vw] = self.height[v];
            if self.height[w] == NONE {
                // tree edge
                self.parent_edge[w] = vw;
                self.height[w] = self.height[v] + 1;
                self.orient(w);
            } else {
                // back edge
                self.lowpt[vw] = self.height[w];
            }
            self.nesting_depth[vw] = 2 * self.lowpt[vw];
            if self.lowpt2[vw] < self.height[v] {
                // chordal
                self.nesting_depth[vw] += 1;
            }
            if e != NONE {
                if self.lowpt[vw] < self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt[e].min(self.lowpt2[vw]);
                    self.lowpt[e] = self.lowpt[vw];
                } else if self.lowpt[vw] > self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt[vw]);
                } else {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt2[vw]);
                }
            }
        }
    }

    fn sort_out_edges(&mut self, n: usize) {
        let m = self.src.len();
        self.out_start.clear();
        self.out_start.resize(n + 1, 0);
        for e in 0..m {
            self.out_start[self.src[e] + 1] += 1;
        }
        for v in 0..n {
            self.out_start[v + 1] += self.out_start[v];
        }
        self.out.clear();
        self.out.resize(m, 0);
        let mut fill: Vec<usize> = self.out_start[..n].to_vec();
        for e in 0..m {
            let s = self.src[e];
            self.out[fill[s]] = e;
            fill[s] += 1;
        }
        for v in 0..n {
            let depth = &self.nesting_depth;
            self.out[self.out_start[v]..self.out_start[v + 1]].sort_by_key(|&e| depth[e]);
        }
    }

    fn conflicting(&self, i: Interval, b: usize) -> bool {
        !i.is_empty() && self.lowpt[i.high] > self.lowpt[b]
    }

    fn lowest(&self, p: &ConflictPair) -> usize {
        match (p.left.is_empty(), p.right.is_empty()) {
            (true, true) => NONE,
            (true, false) => self.lowpt[p.right.low],
            (false, true) => self.lowpt[p.left.low],
            (false, false) => self.lowpt[p.left.low].min(self.lowpt[p.right.low]),
        }
    }

    fn test(&mut self, v: usize) -> bool {
        let e = self.parent_edge[v];
        let (start, end) = (self.out_start[v], self.out_start[v + 1]);
        for k in start..end {
            let ei = self.out[k];
            let w = self.dst[ei];
            self.stack_bottom[ei] = self.stack.len();
            if ei == self.parent_edge[w] {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[ei] = ei;
                self.stack.push(ConflictPair {
                    left: Interval::EMPTY,
                    right: Interval { low: ei, high: ei },
                });
            }
            if self.lowpt[ei] < self.height[v] {
                if k == start {
                    self.lowpt_edge[e] = self.lowpt_edge[ei];
                } else if !self.add_constraints(ei, e) {
                    return false;
                }
            }
        }
        if e != NONE {
            self.remove_back_edges(e);
        }
        true
    }

    fn add_constraints(&mut self, ei: usize, e: usize) -> bool {
        let mut p = ConflictPair::EMPTY;
        // return edges of ei go to the right
        while self.stack.len() > self.stack_bottom[ei] {
            let mut q = self.stack.pop().expect("non-empty above marker");
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            if self.lowpt[q.right.low] > self.lowpt[e] {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    self.reference[p.right.low] = q.right.high;
                    p.right.low = q.right.low;
                }
            } else {
                self.reference[q.right.low] = self.lowpt_edge[e];
            }
        }
        // conflicting return edges of earlier siblings go to the left
        while let Some(&top) = self.stack.last() {
            if !(self.conflicting(top.left, ei) || self.conflicting(top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().expect("checked non-empty");
            if self.conflicting(q.right, ei) {
                q.swap();
            }
            if self.conflicting(q.right, ei) {
                return false;
            }
            if !q.right.is_empty() && p.right.low != NONE {
                self.reference[p.right.low] = q.right.high;
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else {
                self.reference[p.left.low] = q.left.high;
                p.left.low = q.left.low;
            }
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: usize) {
        let u = self.src[e];
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != self.height[u] {
                break;
            }
            self.stack.pop();
        }
        if let Some(mut p) = self.stack.pop() {
            while p.left.high != NONE && self.dst[p.left.high] == u {
                p.left.high = self.reference[p.left.high];
            }
            if p.left.high == NONE && p.left.low != NONE {
                self.reference[p.left.low] = p.right.low;
                p.left.low = NONE;
            }
            while p.right.high != NONE && self.dst[p.right.high] == u {
                p.right.high = self.reference[p.right.high];
            }
            if p.right.high == NONE && p.right.low != NONE {
                self.reference[p.right.low] = p.left.low;
                p.right.low = NONE;
            }
            self.stack.push(p);
        }
        if self.lowpt[e] < self.height[u] {
            if let Some(top) = self.stack.last() {
                let (hl, hr) = (top.left.high, top.right.high);
                self.reference[e] = if hl != NONE && (hr == NONE || self.lowpt[hl] > self.lowpt[hr])
                {
                    hl
                } else {
                    hr
                };
            }
        }
    }
}

/// One-shot planarity check.
pub fn is_planar(n: usize, edges: &[Link]) -> bool {
    PlanarityTester::new().is_planar(n, edges)
}
