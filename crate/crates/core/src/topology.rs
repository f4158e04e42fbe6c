//! Components, small cliques and the comparisons between threshold
//! networks, the original MST/PMFG and the two bootstrap methods.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::bootstrap::{BootstrapMethod, BootstrapTally};
use crate::data::{SectorLevel, SectorMap};
use crate::error::{Error, Result};
use crate::filtering::{threshold_network, DisjointSets, EdgeNetwork, Link, ThresholdRule};
use crate::partitions::Partition;

/// Connected components of the non-isolated nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub partition: Partition,
    pub isolated: Vec<usize>,
}

pub fn components(net: &EdgeNetwork) -> Components {
    let n = net.n_nodes();
    let mut sets = DisjointSets::new(n);
    for &(a, b) in net.edges() {
        sets.union(a, b);
    }
    let degrees = net.degrees();
    let mut assignments = Vec::new();
    let mut isolated = Vec::new();
    for (v, &deg) in degrees.iter().enumerate() {
        if deg == 0 {
            isolated.push(v);
        } else {
            assignments.push((v, sets.find(v)));
        }
    }
    Components {
        partition: Partition::new(assignments).expect("members are distinct"),
        isolated,
    }
}

/// All cliques of `size` nodes (3 or 4), as sorted tuples in
/// lexicographic order.
pub fn count_cliques(net: &EdgeNetwork, size: usize) -> Result<Vec<Vec<usize>>> {
    if size != 3 && size != 4 {
        return Err(Error::InvalidArgument(format!(
            "clique size must be 3 or 4, got {size}"
        )));
    }
    let adj: Vec<BTreeSet<usize>> = net
        .adjacency()
        .into_iter()
        .map(|l| l.into_iter().collect())
        .collect();
    let mut out = Vec::new();
    for &(u, v) in net.edges() {
        // u < v; extend with larger common neighbours only
        for &w in adj[u].range(v + 1..) {
            if !adj[v].contains(&w) {
                continue;
            }
            if size == 3 {
                out.push(vec![u, v, w]);
                continue;
            }
            for &x in adj[u].range(w + 1..) {
                if adj[v].contains(&x) && adj[w].contains(&x) {
                    out.push(vec![u, v, w, x]);
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Clique counts of one threshold network and their inclusion in the PMFG.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliqueReport {
    pub method: BootstrapMethod,
    pub threshold: u32,
    pub clique_size: usize,
    pub total: usize,
    pub in_pmfg: usize,
    /// `None` when there are no cliques.
    pub percent_in_pmfg: Option<f64>,
}

pub fn clique_pmfg_inclusion(
    tally: &BootstrapTally,
    pmfg: &EdgeNetwork,
    thresholds: &[u32],
    clique_size: usize,
    rule: ThresholdRule,
) -> Result<Vec<CliqueReport>> {
    if pmfg.n_nodes() != tally.n_nodes() {
        return Err(Error::ShapeMismatch(
            "PMFG and tally node counts differ".into(),
        ));
    }
    thresholds
        .iter()
        .map(|&threshold| {
            let net = threshold_network(tally, threshold, rule)?;
            let cliques = count_cliques(&net, clique_size)?;
            let in_pmfg = cliques
                .iter()
                .filter(|c| {
                    c.iter()
                        .enumerate()
                        .all(|(k, &a)| c[k + 1..].iter().all(|&b| pmfg.contains(a, b)))
                })
                .count();
            let total = cliques.len();
            Ok(CliqueReport {
                method: tally.method(),
                threshold,
                clique_size,
                total,
                in_pmfg,
                percent_in_pmfg: (total > 0).then(|| 100.0 * in_pmfg as f64 / total as f64),
            })
        })
        .collect()
}

/// Node and link counts of a threshold network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScanRow {
    pub method: BootstrapMethod,
    pub threshold: u32,
    pub non_isolated_nodes: usize,
    pub links: usize,
}

pub fn threshold_scan(
    tally: &BootstrapTally,
    thresholds: &[u32],
    rule: ThresholdRule,
) -> Result<Vec<ScanRow>> {
    thresholds
        .iter()
        .map(|&threshold| {
            let net = threshold_network(tally, threshold, rule)?;
            Ok(ScanRow {
                method: tally.method(),
                threshold,
                non_isolated_nodes: net.non_isolated_count(),
                links: net.n_edges(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverlapRow {
    pub method: BootstrapMethod,
    pub threshold: u32,
    pub common_links: usize,
    pub mst_links: usize,
}

/// Links shared by each threshold network and the original MST.
pub fn mst_overlap_curve(
    tally: &BootstrapTally,
    original_mst: &EdgeNetwork,
    thresholds: &[u32],
    rule: ThresholdRule,
) -> Result<Vec<OverlapRow>> {
    thresholds
        .iter()
        .map(|&threshold| {
            let net = threshold_network(tally, threshold, rule)?;
            Ok(OverlapRow {
                method: tally.method(),
                threshold,
                common_links: net.common_edges(original_mst),
                mst_links: original_mst.n_edges(),
            })
        })
        .collect()
}

/// Bootstrap values of one link under both methods.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScatterPoint {
    pub link: Link,
    pub row_value: u32,
    pub pair_value: u32,
    pub same_sector: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scatter {
    pub points: Vec<ScatterPoint>,
    /// Links observed by both methods.
    pub both_positive: usize,
}

/// Union of the links of both tallies, missing counts as 0.
pub fn scatter(
    row_tally: &BootstrapTally,
    pair_tally: &BootstrapTally,
    elements: &[String],
    sectors: &SectorMap,
) -> Result<Scatter> {
    if row_tally.n_nodes() != pair_tally.n_nodes() || row_tally.replicas() != pair_tally.replicas()
    {
        return Err(Error::ShapeMismatch(
            "tallies differ in node count or replica count".into(),
        ));
    }
    if elements.len() != row_tally.n_nodes() {
        return Err(Error::ShapeMismatch(
            "element list does not match tallies".into(),
        ));
    }
    let labels = sectors.labels_for(elements, SectorLevel::Sector)?;
    let links: BTreeSet<Link> = row_tally
        .iter()
        .chain(pair_tally.iter())
        .map(|(l, _)| l)
        .collect();
    let points: Vec<ScatterPoint> = links
        .into_iter()
        .map(|(a, b)| ScatterPoint {
            link: (a, b),
            row_value: row_tally.count(a, b),
            pair_value: pair_tally.count(a, b),
            same_sector: labels[a] == labels[b],
        })
        .collect();
    let both_positive = points
        .iter()
        .filter(|p| p.row_value > 0 && p.pair_value > 0)
        .count();
    Ok(Scatter {
        points,
        both_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(n: usize, e: &[Link]) -> EdgeNetwork {
        EdgeNetwork::new(n, e.iter().copied()).unwrap()
    }

    #[test]
    fn component_examples() {
        let c = components(&EdgeNetwork::empty(4));
        assert!(c.partition.is_empty());
        assert_eq!(c.isolated, [0, 1, 2, 3]);

        let c = components(&net(4, &[(0, 1), (1, 2), (1, 3)]));
        assert_eq!(c.partition.blocks(), vec![vec![0, 1, 2, 3]]);
        assert!(c.isolated.is_empty());

        let c = components(&net(5, &[(0, 1), (2, 3)]));
        assert_eq!(c.partition.blocks(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(c.isolated, [4]);
    }

    #[test]
    fn clique_examples() {
        let k4 = net(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(count_cliques(&k4, 3).unwrap().len(), 4);
        assert_eq!(count_cliques(&k4, 4).unwrap(), vec![vec![0, 1, 2, 3]]);
        let tree = net(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]);
        assert!(count_cliques(&tree, 3).unwrap().is_empty());
        assert!(count_cliques(&tree, 5).is_err());
    }

    #[test]
    fn cliques_match_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        for _ in 0..20 {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            let g = net(n, &edges);
            let mut three = Vec::new();
            let mut four = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        if g.contains(a, b) && g.contains(a, c) && g.contains(b, c) {
                            three.push(vec![a, b, c]);
                            for d in c + 1..n {
                                if g.contains(a, d) && g.contains(b, d) && g.contains(c, d) {
                                    four.push(vec![a, b, c, d]);
                                }
                            }
                        }
                    }
                }
            }
            assert_eq!(count_cliques(&g, 3).unwrap(), three);
            assert_eq!(count_cliques(&g, 4).unwrap(), four);
        }
    }

    fn tally(method: BootstrapMethod, counts: &[(Link, u32)]) -> BootstrapTally {
        BootstrapTally::from_counts(method, 10, 5, counts.iter().copied()).unwrap()
    }

    #[test]
    fn clique_inclusion_report() {
        let t = tally(
            BootstrapMethod::Row,
            &[
                ((0, 1), 9),
                ((1, 2), 9),
                ((0, 2), 8),
                ((2, 3), 3),
                ((1, 3), 3),
                ((3, 4), 2),
            ],
        );
        let pmfg = net(
            5,
            &[
                (0, 1),
                (1, 2),
                (0, 2),
                (2, 3),
                (3, 4),
                (2, 4),
                (0, 4),
                (1, 4),
                (0, 3),
            ],
        );
        let r = clique_pmfg_inclusion(&t, &pmfg, &[9, 7, 2], 3, ThresholdRule::Strict).unwrap();
        assert_eq!(
            (r[0].total, r[0].in_pmfg, r[0].percent_in_pmfg),
            (0, 0, None)
        );
        assert_eq!((r[1].total, r[1].in_pmfg), (1, 1));
        assert_eq!(r[1].percent_in_pmfg, Some(100.0));
        // adds triangle (1,2,3), whose edge (1,3) is not in the PMFG
        assert_eq!((r[2].total, r[2].in_pmfg), (2, 1));
        assert_eq!(r[2].percent_in_pmfg, Some(50.0));
    }

    #[test]
    fn overlap_curve_is_monotone() {
        let t = tally(
            BootstrapMethod::Pair,
            &[
                ((0, 1), 10),
                ((1, 2), 7),
                ((2, 3), 5),
                ((3, 4), 2),
                ((0, 4), 1),
            ],
        );
        let mst = net(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let rows =
            mst_overlap_curve(&t, &mst, &[0, 1, 2, 5, 7, 9, 10], ThresholdRule::Strict).unwrap();
        let common: Vec<usize> = rows.iter().map(|r| r.common_links).collect();
        assert_eq!(common, [4, 4, 3, 2, 1, 1, 0]);
        assert!(rows.iter().all(|r| r.mst_links == 4));
    }

    #[test]
    fn scan_counts_nodes_and_links() {
        let t = tally(BootstrapMethod::Row, &[((0, 1), 10), ((2, 3), 4)]);
        let rows = threshold_scan(&t, &[9, 3], ThresholdRule::Strict).unwrap();
        assert_eq!((rows[0].non_isolated_nodes, rows[0].links), (2, 1));
        assert_eq!((rows[1].non_isolated_nodes, rows[1].links), (4, 2));
    }

    #[test]
    fn scatter_union_semantics() {
        let names: Vec<String> = (0..5).map(|i| format!("E{i}")).collect();
        let sectors = SectorMap::new(names.iter().enumerate().map(|(i, e)| {
            let s = if i < 3 { "A" } else { "B" };
            (e.clone(), s.to_string(), s.to_string())
        }))
        .unwrap();
        let row = tally(BootstrapMethod::Row, &[((0, 1), 7), ((1, 3), 2)]);
        let pair = tally(BootstrapMethod::Pair, &[((1, 3), 4), ((3, 4), 1)]);
        let s = scatter(&row, &pair, &names, &sectors).unwrap();
        assert_eq!(s.points.len(), 3);
        assert_eq!(s.both_positive, 1);
        assert_eq!(
            s.points[0],
            ScatterPoint {
                link: (0, 1),
                row_value: 7,
                pair_value: 0,
                same_sector: true
            }
        );
        assert!(!s.points[1].same_sector);
        assert!(s.points[2].same_sector);

        let other = BootstrapTally::from_counts(BootstrapMethod::Pair, 11, 5, []).unwrap();
        assert!(scatter(&row, &other, &names, &sectors).is_err());
    }
}
