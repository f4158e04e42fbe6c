//! Partition comparison (adjusted Rand and adjusted Wallace indices) and
//! the sector-association exact test on row-versus-pair bootstrap values.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bootstrap::{BootstrapMethod, BootstrapTally};
use crate::data::{SectorLevel, SectorMap};
use crate::error::{Error, Result};
use crate::filtering::{threshold_network, ThresholdRule};
use crate::topology::{components, ScatterPoint};

/// Assignment of a set of members (element indices) to block labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    // sorted by member
    members: Vec<usize>,
    labels: Vec<usize>,
}

impl Partition {
    /// Builds a partition from `(member, label)` assignments. Labels are
    /// renumbered canonically by first appearance in member order.
    pub fn new(assignments: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = assignments.into_iter().collect();
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::PartitionMismatch(format!(
                "member {} assigned twice",
                w[0].0
            )));
        }
        let mut relabel: HashMap<usize, usize> = HashMap::new();
        let labels = pairs
            .iter()
            .map(|&(_, l)| {
                let next = relabel.len();
                *relabel.entry(l).or_insert(next)
            })
            .collect();
        Ok(Partition {
            members: pairs.into_iter().map(|(m, _)| m).collect(),
            labels,
        })
    }

    /// Members `0..labels.len()` with the given labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        Self::new(labels.iter().copied().enumerate()).expect("members are distinct")
    }

    pub fn from_blocks(blocks: &[Vec<usize>]) -> Result<Self> {
        Self::new(
            blocks
                .iter()
                .enumerate()
                .flat_map(|(b, block)| block.iter().map(move |&m| (m, b))),
        )
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn label_of(&self, member: usize) -> Option<usize> {
        self.members
            .binary_search(&member)
            .ok()
            .map(|k| self.labels[k])
    }

    /// Blocks in canonical order, members sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (&m, &l) in self.members.iter().zip(&self.labels) {
            out[l].push(m);
        }
        out
    }

    /// Restriction to `members`, which must all belong to this partition.
    pub fn restrict(&self, members: &[usize]) -> Result<Self> {
        let assignments = members
            .iter()
            .map(|&m| {
                self.label_of(m)
                    .map(|l| (m, l))
                    .ok_or_else(|| Error::PartitionMismatch(format!("member {m} not covered")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(assignments)
    }

    /// Single block, or every block a singleton.
    pub fn is_degenerate(&self) -> bool {
        let k = self.n_blocks();
        k <= 1 || k == self.len()
    }
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Pair-count statistics of two partitions over a common universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencySummary {
    /// Block-overlap table, test blocks as rows.
    pub table: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencySummary {
    pub fn new(test: &Partition, reference: &Partition) -> Result<Self> {
        if test.members != reference.members {
            return Err(Error::PartitionMismatch(
                "partitions cover different universes".into(),
            ));
        }
        let (r, c) = (test.n_blocks(), reference.n_blocks());
        let mut table = vec![vec![0u64; c]; r];
        for (&a, &b) in test.labels.iter().zip(&reference.labels) {
            table[a][b] += 1;
        }
        let row_sums = table.iter().map(|row| row.iter().sum()).collect();
        let col_sums = (0..c)
            .map(|j| table.iter().map(|row| row[j]).sum())
            .collect();
        Ok(ContingencySummary {
            table,
            row_sums,
            col_sums,
            total: test.len() as u64,
        })
    }

    /// Pairs co-blocked in both partitions.
    pub fn pairs_together(&self) -> u64 {
        self.table.iter().flatten().map(|&x| choose2(x)).sum()
    }

    /// Pairs co-blocked in the test partition.
    pub fn pairs_in_test(&self) -> u64 {
        self.row_sums.iter().map(|&x| choose2(x)).sum()
    }

    /// Pairs co-blocked in the reference partition.
    pub fn pairs_in_reference(&self) -> u64 {
        self.col_sums.iter().map(|&x| choose2(x)).sum()
    }

    pub fn pairs_total(&self) -> u64 {
        choose2(self.total)
    }
}

/// Hubert-Arabie adjusted Rand index.
///
/// Evaluated as one exact integer ratio, so identical partitions give
/// exactly 1. When the denominator vanishes (both partitions a single
/// block, or both all singletons) the partitions coincide and 1 is
/// returned.
pub fn ari(test: &Partition, reference: &Partition) -> Result<f64> {
    let c = ContingencySummary::new(test, reference)?;
    if c.total < 2 {
        return Err(Error::PartitionMismatch(format!(
            "need at least 2 members, got {}",
            c.total
        )));
    }
    let index = i128::from(c.pairs_together());
    let a = i128::from(c.pairs_in_test());
    let b = i128::from(c.pairs_in_reference());
    let m = i128::from(c.pairs_total());
    // (index - a b / m) / ((a + b) / 2 - a b / m), scaled by 2 m
    let num = 2 * (index * m - a * b);
    let den = (a + b) * m - 2 * a * b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Adjusted Wallace index of `test` against `reference`:
/// `(W - p) / (1 - p)` with `W` the fraction of test co-blocked pairs
/// that the reference also co-blocks and `p` the fraction of all pairs
/// the reference co-blocks.
///
/// `None` when `W` is undefined (no co-blocked test pair) or the
/// reference is a single block (`p = 1`).
pub fn awi(test: &Partition, reference: &Partition) -> Result<Option<f64>> {
    let c = ContingencySummary::new(test, reference)?;
    let index = i128::from(c.pairs_together());
    let a = i128::from(c.pairs_in_test());
    let b = i128::from(c.pairs_in_reference());
    let m = i128::from(c.pairs_total());
    if a == 0 || m == b {
        return Ok(None);
    }
    Ok(Some((index * m - a * b) as f64 / (a * (m - b)) as f64))
}

/// One point of the index-versus-threshold curves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub method: BootstrapMethod,
    pub level: SectorLevel,
    pub threshold: u32,
    /// Non-isolated nodes of the threshold network.
    pub nodes: usize,
    pub ari: Option<f64>,
    pub awi: Option<f64>,
    /// Either partition is a single block or all singletons.
    pub degenerate: bool,
}

/// ARI and AWI between the component partition of each threshold network
/// and the expert classification restricted to the same nodes.
pub fn metric_curves(
    tally: &BootstrapTally,
    elements: &[String],
    sectors: &SectorMap,
    level: SectorLevel,
    thresholds: &[u32],
    rule: ThresholdRule,
) -> Result<Vec<MetricRow>> {
    if elements.len() != tally.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} elements for a tally over {} nodes",
            elements.len(),
            tally.n_nodes()
        )));
    }
    let expert = Partition::from_labels(&sectors.labels_for(elements, level)?);
    thresholds
        .iter()
        .map(|&threshold| {
            let net = threshold_network(tally, threshold, rule)?;
            let comps = components(&net);
            let test = comps.partition;
            let nodes = test.len();
            let reference = expert.restrict(test.members())?;
            let (ari_value, awi_value) = if nodes >= 2 {
                (Some(ari(&test, &reference)?), awi(&test, &reference)?)
            } else {
                (None, None)
            };
            Ok(MetricRow {
                method: tally.method(),
                level,
                threshold,
                nodes,
                ari: ari_value,
                awi: awi_value,
                degenerate: nodes < 2 || test.is_degenerate() || reference.is_degenerate(),
            })
        })
        .collect()
}

/// Compares two curves at equal non-isolated node counts. For every node
/// count reached by both, the indices of all thresholds giving that count
/// are averaged per curve. Returns `(node count, first mean, second mean)`.
pub fn matched_by_nodes(
    first: &[MetricRow],
    second: &[MetricRow],
    pick: impl Fn(&MetricRow) -> Option<f64>,
) -> Vec<(usize, f64, f64)> {
    let mean_by_nodes = |rows: &[MetricRow]| {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in rows.iter().filter(|r| !r.degenerate) {
            if let Some(v) = pick(r) {
                let e = acc.entry(r.nodes).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.into_iter()
            .map(|(k, (s, c))| (k, s / c as f64))
            .collect::<BTreeMap<_, _>>()
    };
    let a = mean_by_nodes(first);
    let b = mean_by_nodes(second);
    a.iter()
        .filter_map(|(k, &va)| b.get(k).map(|&vb| (*k, va, vb)))
        .collect()
}

/// Two-sided Fisher exact test p-value for the 2×2 table
/// `[[a, b], [c, d]]`, summing all tables with the same margins whose
/// probability does not exceed that of the observed one. `None` when a
/// margin is zero.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Option<f64> {
    let [[a, b], [c, d]] = table;
    let (r1, r2) = (a + b, c + d);
    let (c1, c2) = (a + c, b + d);
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return None;
    }
    let n = r1 + r2;
    if n <= EXACT_FISHER_MAX_N {
        Some(fisher_exact_integer(a, r1, r2, c1))
    } else {
        Some(fisher_exact_log(a, r1, r2, c1))
    }
}

fn fisher_exact_log(a: u64, r1: u64, r2: u64, c1: u64) -> f64 {
    let n = r1 + r2;
    let c2 = n - c1;
    let ln_fact = ln_factorials(n as usize);
    let lf = |k: u64| ln_fact[k as usize];
    let ln_denominator = lf(n) - lf(r1) - lf(r2) - lf(c1) - lf(c2);
    let ln_p = |x: u64| -> f64 {
        // x = top-left cell
        -(ln_denominator + lf(x) + lf(r1 - x) + lf(c1 - x) + lf(r2 + x - c1))
    };
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let observed = ln_p(a);
    // relative tolerance absorbs rounding between tables of equal probability
    let cutoff = observed + 1e-7f64.ln_1p();
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|&lp| lp <= cutoff)
        .map(f64::exp)
        .sum();
    p.min(1.0)
}

// Largest total for which every binomial below fits in u128.
const EXACT_FISHER_MAX_N: u64 = 120;

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

fn fisher_exact_integer(a: u64, r1: u64, r2: u64, c1: u64) -> f64 {
    let weight = |x: u64| binomial(r1, x) * binomial(r2, c1 - x);
    let observed = weight(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let hits: u128 = (lo..=hi).map(weight).filter(|&w| w <= observed).sum();
    (hits as f64 / binomial(r1 + r2, c1) as f64).min(1.0)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

pub const ASSOCIATION_ALPHA: f64 = 0.01;

/// Outcome of the sector-association test.
///
/// `table` rows are `[row-dominant (r > p), pair-dominant (p > r)]`,
/// columns `[same sector, different sector]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssociationReport {
    pub table: [[u64; 2]; 2],
    pub p_value: Option<f64>,
    pub direction: AssociationDirection,
    pub alpha: f64,
    pub reject: Option<bool>,
    /// Links with equal bootstrap values, left out of the table.
    pub ties: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationDirection {
    /// Row-dominant links are more often cross-sector than pair-dominant ones.
    RowDominantCrossSector,
    /// Row-dominant links are more often same-sector.
    RowDominantSameSector,
    None,
    Undefined,
}

/// Tests whether the sign of `r_bv - p_bv` is independent of whether the
/// link joins two elements of the same sector.
pub fn sector_association_test(points: &[ScatterPoint]) -> AssociationReport {
    let mut table = [[0u64; 2]; 2];
    let mut ties = 0;
    for p in points {
        let row = match p.row_value.cmp(&p.pair_value) {
            std::cmp::Ordering::Greater => 0,
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Equal => {
                ties += 1;
                continue;
            }
        };
        let col = if p.same_sector { 0 } else { 1 };
        table[row][col] += 1;
    }
    let p_value = fisher_exact(table);
    let direction = match p_value {
        None => AssociationDirection::Undefined,
        Some(_) => {
            // compare cross-sector shares: b / (a + b) against d / (c + d)
            let [[a, b], [c, d]] = table;
            let lhs = u128::from(b) * u128::from(c + d);
            let rhs = u128::from(d) * u128::from(a + b);
            match lhs.cmp(&rhs) {
                std::cmp::Ordering::Greater => AssociationDirection::RowDominantCrossSector,
                std::cmp::Ordering::Less => AssociationDirection::RowDominantSameSector,
                std::cmp::Ordering::Equal => AssociationDirection::None,
            }
        }
    };
    AssociationReport {
        table,
        p_value,
        direction,
        alpha: ASSOCIATION_ALPHA,
        reject: p_value.map(|p| p < ASSOCIATION_ALPHA),
        ties,
    }
}
