//! End-to-end analysis: original filtered networks, bootstrap tallies and
//! every derived table, plus writing them to an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bootstrap::{
    distinct_link_count, possible_links, run_bootstrap, BootstrapConfig, BootstrapMethod,
    BootstrapTally,
};
use crate::correlation::{pearson, to_distance, write_matrix_csv, CorrelationMatrix};
use crate::data::{ReturnsPanel, SectorLevel, SectorMap};
use crate::error::{Error, Result, StageContext};
use crate::filtering::{mst, pmfg, EdgeNetwork, ThresholdRule};
use crate::partitions::{metric_curves, sector_association_test, AssociationReport, MetricRow};
use crate::report;
use crate::topology::{
    clique_pmfg_inclusion, mst_overlap_curve, scatter, threshold_scan, CliqueReport, OverlapRow,
    ScanRow, Scatter,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub methods: Vec<BootstrapMethod>,
    pub replicas: u32,
    pub master_seed: u64,
    /// Descending thresholds used by every per-threshold table.
    pub thresholds: Vec<u32>,
    pub rule: ThresholdRule,
    pub workers: usize,
    pub levels: Vec<SectorLevel>,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("select at least one method".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("need at least one replica".into()));
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| t > self.replicas) {
            return Err(Error::InvalidArgument(format!(
                "threshold {t} exceeds replica count {}",
                self.replicas
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TallySummary {
    pub method: BootstrapMethod,
    pub replicas: u32,
    pub distinct_links: usize,
    pub possible_links: usize,
    pub min_count: u32,
    pub max_count: u32,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub correlation: CorrelationMatrix,
    pub mst: EdgeNetwork,
    pub pmfg: Option<EdgeNetwork>,
    pub tallies: Vec<BootstrapTally>,
    pub scan: Vec<ScanRow>,
    pub overlap: Vec<OverlapRow>,
    pub cliques: Vec<CliqueReport>,
    pub cliques4: Vec<CliqueReport>,
    pub metrics: Vec<MetricRow>,
    pub scatter: Option<Scatter>,
    pub association: Option<AssociationReport>,
}

impl Analysis {
    pub fn tally(&self, method: BootstrapMethod) -> Option<&BootstrapTally> {
        self.tallies.iter().find(|t| t.method() == method)
    }

    pub fn tally_summaries(&self) -> Vec<TallySummary> {
        self.tallies
            .iter()
            .map(|t| TallySummary {
                method: t.method(),
                replicas: t.replicas(),
                distinct_links: distinct_link_count(t),
                possible_links: possible_links(t.n_nodes()),
                min_count: t.min_count(),
                max_count: t.max_count(),
            })
            .collect()
    }
}

/// Runs every stage. Sector-dependent outputs are produced only when
/// `sectors` is given; the scatter and association test need both methods.
pub fn analyze(
    panel: &ReturnsPanel,
    sectors: Option<&SectorMap>,
    config: &AnalysisConfig,
    mut log: impl FnMut(&str),
) -> Result<Analysis> {
    config.validate().stage("config")?;
    if let Some(s) = sectors {
        s.check_covers(panel.elements()).stage("sectors")?;
    }
    let rule = config.rule;
    let thresholds = &config.thresholds;

    log("correlation");
    let correlation = pearson(panel).stage("correlation")?;
    log("mst");
    let tree = mst(&to_distance(&correlation));
    log("pmfg");
    let planar = if panel.n_elements() >= 3 {
        Some(pmfg(&correlation).stage("pmfg")?)
    } else {
        None
    };

    let mut tallies = Vec::new();
    for &method in &config.methods {
        log(&format!(
            "bootstrap ({method}, {} replicas)",
            config.replicas
        ));
        let bc = BootstrapConfig::new(method, config.replicas, config.master_seed)
            .with_workers(config.workers);
        tallies.push(run_bootstrap(panel, &bc).stage("bootstrap")?);
    }

    log("threshold networks");
    let mut scan = Vec::new();
    let mut overlap = Vec::new();
    let mut cliques = Vec::new();
    let mut cliques4 = Vec::new();
    for t in &tallies {
        scan.extend(threshold_scan(t, thresholds, rule).stage("threshold scan")?);
        overlap.extend(mst_overlap_curve(t, &tree, thresholds, rule).stage("mst overlap")?);
        if let Some(p) = &planar {
            cliques.extend(clique_pmfg_inclusion(t, p, thresholds, 3, rule).stage("cliques")?);
            cliques4.extend(clique_pmfg_inclusion(t, p, thresholds, 4, rule).stage("cliques")?);
        }
    }

    let mut metrics = Vec::new();
    let mut scatter_data = None;
    let mut association = None;
    if let Some(sectors) = sectors {
        log("partition metrics");
        for t in &tallies {
            for &level in &config.levels {
                metrics.extend(
                    metric_curves(t, panel.elements(), sectors, level, thresholds, rule)
                        .stage("metrics")?,
                );
            }
        }
        if let (Some(row), Some(pair)) = (
            tallies.iter().find(|t| t.method() == BootstrapMethod::Row),
            tallies.iter().find(|t| t.method() == BootstrapMethod::Pair),
        ) {
            log("scatter and association test");
            let s = scatter(row, pair, panel.elements(), sectors).stage("scatter")?;
            association = Some(sector_association_test(&s.points));
            scatter_data = Some(s);
        }
    }

    Ok(Analysis {
        correlation,
        mst: tree,
        pmfg: planar,
        tallies,
        scan,
        overlap,
        cliques,
        cliques4,
        metrics,
        scatter: scatter_data,
        association,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file(
    dir: &Path,
    name: &str,
    written: &mut Vec<PathBuf>,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let mut w = create(dir, name)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> std::io::Result<String> {
    serde_json::to_string_pretty(value).map_err(std::io::Error::other)
}

/// Writes every table of `analysis` into `dir` and returns the paths.
pub fn write_outputs(
    analysis: &Analysis,
    panel: &ReturnsPanel,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let elements = panel.elements();
    let mut written = Vec::new();
    let w = &mut written;

    let corr = &analysis.correlation;
    write_file(dir, "correlation.csv", w, |o| {
        write_matrix_csv(corr.n(), corr.values(), elements, o)
    })?;
    write_network(dir, "mst", &analysis.mst, elements, w)?;
    if let Some(p) = &analysis.pmfg {
        write_network(dir, "pmfg", p, elements, w)?;
    }
    for t in &analysis.tallies {
        write_file(dir, &format!("tally_{}.csv", t.method()), w, |o| {
            t.write_csv(elements, o)
        })?;
    }
    write_file(dir, "bootstrap_summary.json", w, |o| {
        writeln!(o, "{}", to_json(&analysis.tally_summaries())?)
    })?;
    let tallies: Vec<&BootstrapTally> = analysis.tallies.iter().collect();
    write_file(dir, "histogram.csv", w, |o| {
        report::write_histogram(&tallies, o)
    })?;
    write_file(dir, "threshold_scan.csv", w, |o| {
        report::write_threshold_scan(&analysis.scan, o)
    })?;
    write_file(dir, "mst_overlap.csv", w, |o| {
        report::write_mst_overlap(&analysis.overlap, o)
    })?;
    if analysis.pmfg.is_some() {
        write_file(dir, "cliques.csv", w, |o| {
            report::write_cliques(&analysis.cliques, o)
        })?;
        write_file(dir, "cliques4.csv", w, |o| {
            report::write_cliques(&analysis.cliques4, o)
        })?;
    }
    if !analysis.metrics.is_empty() {
        write_file(dir, "metrics.csv", w, |o| {
            report::write_metrics(&analysis.metrics, o)
        })?;
    }
    if let Some(s) = &analysis.scatter {
        write_file(dir, "scatter.csv", w, |o| {
            report::write_scatter(s, elements, o)
        })?;
    }
    if let Some(a) = &analysis.association {
        write_file(dir, "association_test.json", w, |o| {
            writeln!(o, "{}", to_json(a)?)
        })?;
    }
    Ok(written)
}

/// Edge list `<stem>.csv` plus summary `<stem>.json`.
pub fn write_network(
    dir: &Path,
    stem: &str,
    net: &EdgeNetwork,
    elements: &[String],
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    write_file(dir, &format!("{stem}.csv"), written, |o| {
        net.write_csv(elements, o)
    })?;
    write_file(dir, &format!("{stem}.json"), written, |o| {
        writeln!(o, "{}", to_json(&net.summary())?)
    })
}
