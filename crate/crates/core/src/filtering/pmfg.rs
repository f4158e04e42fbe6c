use super::{DisjointSets, EdgeNetwork, Link, PlanarityTester};
use crate::correlation::{correlation_distance, CorrelationMatrix};
use crate::error::{Error, Result};

/// Planar maximally filtered graph.
///
/// Pairs are visited from the most to the least correlated (ascending
/// `(distance, i, j)`, the same order the MST uses) and an edge is kept
/// when the graph stays planar. Construction stops at `3 (n - 2)` edges.
/// Edge weights are the correlations.
pub fn pmfg(corr: &CorrelationMatrix) -> Result<EdgeNetwork> {
    let n = corr.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "PMFG needs n >= 3, got {n}"
        )));
    }
    let mut candidates: Vec<(f64, Link)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            candidates.push((correlation_distance(corr.get(i, j)), (i, j)));
        }
    }
    candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let target = 3 * (n - 2);
    let mut edges: Vec<Link> = Vec::with_capacity(target);
    let mut components = DisjointSets::new(n);
    let mut tester = PlanarityTester::new();
    for (_, (i, j)) in candidates {
        // an edge joining two components is a bridge and cannot break planarity
        let accept = if !components.same(i, j) {
            true
        } else {
            edges.push((i, j));
            let ok = tester.is_planar(n, &edges);
            edges.pop();
            ok
        };
        if accept {
            edges.push((i, j));
            components.union(i, j);
            if edges.len() == target {
                break;
            }
        }
    }
    EdgeNetwork::with_weights(n, edges.into_iter().map(|(i, j)| ((i, j), corr.get(i, j))))
}
