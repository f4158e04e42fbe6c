//! Row and pair bootstrap replicas of the correlation matrix and the
//! per-link tally of replica MSTs.
//!
//! Every replica draws its randomness from a ChaCha8 generator keyed by a
//! seed derived from `(master_seed, replica index)`. Pair replicas further
//! split that generator into one stream per unordered pair `(i, j)`. The
//! tally is therefore independent of scheduling and worker count.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    correlation_distance, pearson_resampled, pearson_rows, CorrelationMatrix,
};
use crate::data::ReturnsPanel;
use crate::error::{Error, Result};
use crate::filtering::{link, Link};

/// Consecutive degenerate draws tolerated before a replica fails.
pub const MAX_REDRAWS: usize = 100;

pub const DEFAULT_REPLICAS: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    /// Resample whole synchronous time records.
    Row,
    /// Resample time records independently for every pair.
    Pair,
}

impl BootstrapMethod {
    pub const ALL: [BootstrapMethod; 2] = [BootstrapMethod::Row, BootstrapMethod::Pair];

    pub fn as_str(self) -> &'static str {
        match self {
            BootstrapMethod::Row => "row",
            BootstrapMethod::Pair => "pair",
        }
    }
}

impl fmt::Display for BootstrapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BootstrapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "row" => Ok(BootstrapMethod::Row),
            "pair" => Ok(BootstrapMethod::Pair),
            other => Err(Error::Parse(format!("unknown bootstrap method {other:?}"))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives per-replica seeds from a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSeedPolicy {
    pub master_seed: u64,
}

impl ReplicaSeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        ReplicaSeedPolicy { master_seed }
    }

    /// Seed of replica `b`. The mix is a bijection of `b` for a fixed
    /// master seed, so distinct replicas never share a seed.
    pub fn replica_seed(&self, b: u64) -> u64 {
        splitmix64(splitmix64(self.master_seed) ^ b)
    }
}

fn pair_stream(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}

/// Row-bootstrap replica: `T` time records drawn with replacement, kept
/// synchronous across all elements.
pub fn row_replica(panel: &ReturnsPanel, seed: u64) -> Result<CorrelationMatrix> {
    let mut scratch = Vec::new();
    row_replica_with(panel, seed, &mut Vec::new(), &mut scratch)
}

fn row_replica_with(
    panel: &ReturnsPanel,
    seed: u64,
    idx: &mut Vec<u32>,
    resampled: &mut Vec<f64>,
) -> Result<CorrelationMatrix> {
    let t_len = panel.n_times();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..MAX_REDRAWS {
        rng.set_stream(attempt as u64);
        rng.set_word_pos(0);
        idx.clear();
        idx.extend((0..t_len).map(|_| rng.random_range(0..t_len as u32)));
        if let Some(c) = row_replica_from_indices(panel, idx, resampled) {
            return Ok(c);
        }
    }
    Err(Error::DegenerateResample(format!(
        "{MAX_REDRAWS} consecutive row resamples had a zero-variance element"
    )))
}

/// Pearson matrix of the panel restricted to time records `idx`; `None`
/// when some element is constant on them.
pub(crate) fn row_replica_from_indices(
    panel: &ReturnsPanel,
    idx: &[u32],
    resampled: &mut Vec<f64>,
) -> Option<CorrelationMatrix> {
    let n = panel.n_elements();
    resampled.clear();
    for row in panel.rows() {
        resampled.extend(idx.iter().map(|&k| row[k as usize]));
    }
    pearson_rows(resampled, n, idx.len()).ok()
}

/// Pair-bootstrap replica: every unordered pair gets its own `T` draws.
/// The result is symmetric with unit diagonal but not necessarily PSD.
pub fn pair_replica(panel: &ReturnsPanel, seed: u64) -> Result<CorrelationMatrix> {
    pair_replica_with(panel, seed, &mut PairScratch::default())
}

#[derive(Default)]
struct PairScratch {
    idx: Vec<u32>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn pair_replica_with(
    panel: &ReturnsPanel,
    seed: u64,
    scratch: &mut PairScratch,
) -> Result<CorrelationMatrix> {
    let n = panel.n_elements();
    let t_len = panel.n_times();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let x = panel.row(i);
        for j in i + 1..n {
            let y = panel.row(j);
            let mut rng = base.clone();
            rng.set_stream(pair_stream(i, j));
            rng.set_word_pos(0);
            let mut rho = None;
            for _ in 0..MAX_REDRAWS {
                scratch.idx.clear();
                scratch
                    .idx
                    .extend((0..t_len).map(|_| rng.random_range(0..t_len as u32)));
                rho = pearson_resampled(x, y, &scratch.idx, &mut scratch.xs, &mut scratch.ys);
                if rho.is_some() {
                    break;
                }
            }
            match rho {
                Some(r) => upper.push(r),
                None => {
                    return Err(Error::DegenerateResample(format!(
                        "{MAX_REDRAWS} consecutive resamples of pair ({}, {}) had zero variance",
                        panel.elements()[i],
                        panel.elements()[j]
                    )))
                }
            }
        }
    }
    Ok(CorrelationMatrix::from_upper(n, upper))
}

pub fn replica(
    panel: &ReturnsPanel,
    method: BootstrapMethod,
    seed: u64,
) -> Result<CorrelationMatrix> {
    match method {
        BootstrapMethod::Row => row_replica(panel, seed),
        BootstrapMethod::Pair => pair_replica(panel, seed),
    }
}

/// Bootstrap values: for every link, the number of replica MSTs that
/// contain it. Links never observed are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapTally {
    method: BootstrapMethod,
    replicas: u32,
    n_nodes: usize,
    counts: BTreeMap<Link, u32>,
}

impl BootstrapTally {
    pub fn from_counts(
        method: BootstrapMethod,
        replicas: u32,
        n_nodes: usize,
        counts: impl IntoIterator<Item = (Link, u32)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((a, b), c) in counts {
            if a == b || a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidArgument(format!("invalid link ({a}, {b})")));
            }
            if c == 0 || c > replicas {
                return Err(Error::InvalidArgument(format!(
                    "count {c} for link ({a}, {b}) outside [1, {replicas}]"
                )));
            }
            if map.insert(link(a, b), c).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "link ({a}, {b}) listed twice"
                )));
            }
        }
        Ok(BootstrapTally {
            method,
            replicas,
            n_nodes,
            counts: map,
        })
    }

    pub fn method(&self) -> BootstrapMethod {
        self.method
    }

    pub fn replicas(&self) -> u32 {
        self.replicas
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.counts.get(&link(a, b)).copied().unwrap_or(0)
    }

    /// `(link, count)` in ascending link order.
    pub fn iter(&self) -> impl Iterator<Item = (Link, u32)> + '_ {
        self.counts.iter().map(|(&l, &c)| (l, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    /// Whether the counts sum to `B (n - 1)`, as every replica MST has
    /// exactly `n - 1` links.
    pub fn is_conserved(&self) -> bool {
        self.total() == u64::from(self.replicas) * (self.n_nodes as u64).saturating_sub(1)
    }

    pub fn max_count(&self) -> u32 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    pub fn min_count(&self) -> u32 {
        self.counts.values().copied().min().unwrap_or(0)
    }

    /// `(bootstrap value, number of links)` for every value observed.
    pub fn histogram(&self) -> Vec<(u32, usize)> {
        let mut h: BTreeMap<u32, usize> = BTreeMap::new();
        for &c in self.counts.values() {
            *h.entry(c).or_default() += 1;
        }
        h.into_iter().collect()
    }

    /// Tally CSV, sorted by descending count then by element names.
    pub fn write_csv(&self, elements: &[String], mut out: impl Write) -> std::io::Result<()> {
        let mut rows: Vec<(&str, &str, u32)> = self
            .counts
            .iter()
            .map(|(&(a, b), &c)| (elements[a].as_str(), elements[b].as_str(), c))
            .collect();
        rows.sort_by(|x, y| y.2.cmp(&x.2).then(x.0.cmp(y.0)).then(x.1.cmp(y.1)));
        writeln!(out, "element_i,element_j,count,method,replicas")?;
        for (a, b, c) in rows {
            writeln!(out, "{a},{b},{c},{},{}", self.method, self.replicas)?;
        }
        Ok(())
    }

    /// Parses a tally CSV written by [`BootstrapTally::write_csv`].
    pub fn parse_csv(text: &str, elements: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i))
            .collect();
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>()
            != ["element_i", "element_j", "count", "method", "replicas"]
        {
            return Err(Error::Parse("unexpected tally header".into()));
        }
        let mut method = None;
        let mut replicas = None;
        let mut counts = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let lookup = |name: &str| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("unknown element {name:?} in tally")))
            };
            let (a, b) = (lookup(&record[0])?, lookup(&record[1])?);
            let c: u32 = record[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad count {:?}", &record[2])))?;
            let m: BootstrapMethod = record[3].parse()?;
            let r: u32 = record[4]
                .parse()
                .map_err(|_| Error::Parse(format!("bad replica count {:?}", &record[4])))?;
            if *method.get_or_insert(m) != m || *replicas.get_or_insert(r) != r {
                return Err(Error::Parse("tally mixes methods or replica counts".into()));
            }
            counts.push(((a, b), c));
        }
        let (Some(method), Some(replicas)) = (method, replicas) else {
            return Err(Error::Parse("empty tally".into()));
        };
        let tally = Self::from_counts(method, replicas, elements.len(), counts)?;
        if !tally.is_conserved() {
            return Err(Error::Parse(format!(
                "tally counts sum to {}, expected {}",
                tally.total(),
                u64::from(replicas) * (elements.len() as u64 - 1)
            )));
        }
        Ok(tally)
    }
}

/// Number of distinct links observed at least once.
pub fn distinct_link_count(tally: &BootstrapTally) -> usize {
    tally.counts.len()
}

/// `n (n - 1) / 2`.
pub fn possible_links(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub method: BootstrapMethod,
    pub replicas: u32,
    pub seed: ReplicaSeedPolicy,
    /// Worker threads; `0` uses the global rayon pool.
    pub workers: usize,
}

impl BootstrapConfig {
    pub fn new(method: BootstrapMethod, replicas: u32, master_seed: u64) -> Self {
        BootstrapConfig {
            method,
            replicas,
            seed: ReplicaSeedPolicy::new(master_seed),
            workers: 0,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        BootstrapConfig { workers, ..self }
    }
}

#[derive(Default)]
struct Scratch {
    idx: Vec<u32>,
    resampled: Vec<f64>,
    pair: PairScratch,
}

fn replica_mst(
    panel: &ReturnsPanel,
    config: &BootstrapConfig,
    b: u32,
    scratch: &mut Scratch,
) -> Result<Vec<Link>> {
    let seed = config.seed.replica_seed(u64::from(b));
    let corr = match config.method {
        BootstrapMethod::Row => {
            row_replica_with(panel, seed, &mut scratch.idx, &mut scratch.resampled)
        }
        BootstrapMethod::Pair => pair_replica_with(panel, seed, &mut scratch.pair),
    }
    .map_err(|e| Error::Replica {
        replica: b as usize,
        reason: e.to_string(),
    })?;
    Ok(
        crate::filtering::prim_edges(corr.n(), |i, j| correlation_distance(corr.get(i, j)))
            .into_iter()
            .map(|(l, _)| l)
            .collect(),
    )
}

/// Runs `B` replicas, extracts each replica's MST and tallies its links.
pub fn run_bootstrap(panel: &ReturnsPanel, config: &BootstrapConfig) -> Result<BootstrapTally> {
    if config.replicas == 0 {
        return Err(Error::InvalidArgument("need at least one replica".into()));
    }
    let work = || -> Vec<Result<Vec<Link>>> {
        (0..config.replicas)
            .into_par_iter()
            .map_init(Scratch::default, |scratch, b| {
                replica_mst(panel, config, b, scratch)
            })
            .collect()
    };
    let results = if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)
    };

    let mut counts: BTreeMap<Link, u32> = BTreeMap::new();
    for edges in results {
        for l in edges? {
            *counts.entry(l).or_default() += 1;
        }
    }
    Ok(BootstrapTally {
        method: config.method,
        replicas: config.replicas,
        n_nodes: panel.n_elements(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{pearson, spectrum, to_distance};
    use crate::data::{synthesize_panel, SynthSpec};
    use crate::filtering::mst;

    fn noise_panel(n: usize, t: usize, seed: u64) -> ReturnsPanel {
        synthesize_panel(&SynthSpec {
            n_elements: n,
            n_sectors: 1,
            n_times: t,
            market_loading: 0.0,
            sector_loading: 0.0,
            noise_scale: 1.0,
            seed,
        })
        .unwrap()
        .0
    }

    #[test]
    fn method_parsing() {
        assert_eq!(
            "row".parse::<BootstrapMethod>().unwrap(),
            BootstrapMethod::Row
        );
        assert_eq!(
            "Pair".parse::<BootstrapMethod>().unwrap(),
            BootstrapMethod::Pair
        );
        assert!("block".parse::<BootstrapMethod>().is_err());
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let p = ReplicaSeedPolicy::new(7);
        let seeds: std::collections::HashSet<u64> =
            (0..10_000).map(|b| p.replica_seed(b)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(p.replica_seed(0), ReplicaSeedPolicy::new(8).replica_seed(0));
    }

    #[test]
    fn single_record_panel_exhausts_redraws() {
        let panel = ReturnsPanel::new_unchecked(vec!["a".into(), "b".into()], vec![1.0, 2.0], 1);
        let err = row_replica(&panel, 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateResample(_)), "{err}");
        let err = pair_replica(&panel, 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateResample(_)), "{err}");
    }

    #[test]
    fn identity_resample_reproduces_original() {
        let panel = noise_panel(6, 40, 1);
        let idx: Vec<u32> = (0..40).collect();
        let replica = row_replica_from_indices(&panel, &idx, &mut Vec::new()).unwrap();
        assert_eq!(replica, pearson(&panel).unwrap());
    }

    #[test]
    fn linear_dependence_survives_resampling() {
        let x: Vec<f64> = (0..30).map(|t| ((t * 7919) % 31) as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let panel = ReturnsPanel::new(vec!["x".into(), "y".into()], vec![x, y], None).unwrap();
        for seed in 0..50 {
            assert!((row_replica(&panel, seed).unwrap().get(0, 1) - 1.0).abs() < 1e-12);
            assert!((pair_replica(&panel, seed).unwrap().get(0, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn replicas_are_reproducible() {
        let panel = noise_panel(8, 30, 2);
        assert_eq!(
            row_replica(&panel, 11).unwrap(),
            row_replica(&panel, 11).unwrap()
        );
        assert_eq!(
            pair_replica(&panel, 11).unwrap(),
            pair_replica(&panel, 11).unwrap()
        );
        assert_ne!(
            pair_replica(&panel, 11).unwrap(),
            pair_replica(&panel, 12).unwrap()
        );
    }

    #[test]
    fn pair_draws_do_not_depend_on_other_elements() {
        let panel = noise_panel(6, 30, 4);
        let rows: Vec<Vec<f64>> = (0..3).map(|i| panel.row(i).to_vec()).collect();
        let names = panel.elements()[..3].to_vec();
        let sub = ReturnsPanel::new(names, rows, None).unwrap();
        let full = pair_replica(&panel, 99).unwrap();
        let part = pair_replica(&sub, 99).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(full.get(i, j), part.get(i, j));
            }
        }
    }

    #[test]
    fn row_replicas_are_psd() {
        let panel = noise_panel(20, 40, 5);
        for seed in 0..20 {
            let s = spectrum(&row_replica(&panel, seed).unwrap());
            assert!(s.min() >= -1e-8, "min eigenvalue {}", s.min());
        }
    }

    #[test]
    fn single_replica_tally() {
        let panel = noise_panel(10, 50, 6);
        let t = run_bootstrap(&panel, &BootstrapConfig::new(BootstrapMethod::Row, 1, 3)).unwrap();
        assert_eq!(distinct_link_count(&t), 9);
        assert!(t.iter().all(|(_, c)| c == 1));
        assert!(t.is_conserved());
    }

    #[test]
    fn tally_matches_direct_replica_msts() {
        let panel = noise_panel(7, 25, 7);
        for method in BootstrapMethod::ALL {
            let config = BootstrapConfig::new(method, 12, 5);
            let tally = run_bootstrap(&panel, &config).unwrap();
            let mut expected: BTreeMap<Link, u32> = BTreeMap::new();
            for b in 0..12 {
                let c = replica(&panel, method, config.seed.replica_seed(b)).unwrap();
                for &l in mst(&to_distance(&c)).edges() {
                    *expected.entry(l).or_default() += 1;
                }
            }
            assert_eq!(tally.iter().collect::<BTreeMap<_, _>>(), expected);
            assert!(tally.is_conserved());
        }
    }

    #[test]
    fn tally_is_independent_of_worker_count() {
        let panel = noise_panel(12, 30, 8);
        for method in BootstrapMethod::ALL {
            let base = BootstrapConfig::new(method, 20, 1);
            let one = run_bootstrap(&panel, &base.with_workers(1)).unwrap();
            let three = run_bootstrap(&panel, &base.with_workers(3)).unwrap();
            assert_eq!(one, three);
        }
    }

    #[test]
    fn zero_replicas_rejected() {
        let panel = noise_panel(4, 10, 9);
        assert!(run_bootstrap(&panel, &BootstrapConfig::new(BootstrapMethod::Row, 0, 1)).is_err());
    }

    #[test]
    fn tally_csv_round_trip() {
        let panel = noise_panel(9, 30, 10);
        let t = run_bootstrap(&panel, &BootstrapConfig::new(BootstrapMethod::Pair, 15, 2)).unwrap();
        let mut out = Vec::new();
        t.write_csv(panel.elements(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let counts: Vec<u32> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(
            BootstrapTally::parse_csv(&text, panel.elements()).unwrap(),
            t
        );
    }

    #[test]
    fn from_counts_validates() {
        assert!(BootstrapTally::from_counts(BootstrapMethod::Row, 5, 3, [((0, 1), 6)]).is_err());
        assert!(BootstrapTally::from_counts(BootstrapMethod::Row, 5, 3, [((0, 1), 0)]).is_err());
        assert!(BootstrapTally::from_counts(BootstrapMethod::Row, 5, 3, [((0, 0), 1)]).is_err());
        assert!(BootstrapTally::from_counts(
            BootstrapMethod::Row,
            5,
            3,
            [((0, 1), 1), ((1, 0), 2)]
        )
        .is_err());
        let t = BootstrapTally::from_counts(BootstrapMethod::Row, 5, 3, [((2, 1), 5), ((0, 1), 5)])
            .unwrap();
        assert_eq!(t.count(1, 2), 5);
        assert!(t.is_conserved());
        assert_eq!(t.histogram(), [(5, 2)]);
    }

    #[test]
    fn possible_links_for_300() {
        assert_eq!(possible_links(300), 44850);
    }
}
