//! CSV renderings of the analysis tables. Undefined values are written as
//! `--`; floats use the shortest representation that parses back exactly.

use std::io::{self, Write};

use crate::bootstrap::BootstrapTally;
use crate::partitions::MetricRow;
use crate::topology::{CliqueReport, OverlapRow, ScanRow, Scatter};

pub const UNDEFINED: &str = "--";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

pub const HISTOGRAM_HEADER: &str = "method,bootstrap_value,links";
pub const THRESHOLD_SCAN_HEADER: &str = "method,threshold,non_isolated_nodes,links";
pub const MST_OVERLAP_HEADER: &str = "method,threshold,common_links,mst_links";
pub const CLIQUES_HEADER: &str = "threshold,method,n_3cliques,in_pmfg,percent";
pub const METRICS_HEADER: &str = "method,level,threshold,nodes,ari,awi,degenerate";
pub const SCATTER_HEADER: &str = "element_i,element_j,row_value,pair_value,same_sector";

/// Number of links per bootstrap value, one block per tally.
pub fn write_histogram(tallies: &[&BootstrapTally], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for t in tallies {
        for (value, links) in t.histogram() {
            writeln!(out, "{},{value},{links}", t.method())?;
        }
    }
    Ok(())
}

pub fn write_threshold_scan(rows: &[ScanRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{THRESHOLD_SCAN_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.method, r.threshold, r.non_isolated_nodes, r.links
        )?;
    }
    Ok(())
}

pub fn write_mst_overlap(rows: &[OverlapRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{MST_OVERLAP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.method, r.threshold, r.common_links, r.mst_links
        )?;
    }
    Ok(())
}

/// Clique table; the count column is named after the clique size.
pub fn write_cliques(reports: &[CliqueReport], mut out: impl Write) -> io::Result<()> {
    let size = reports.first().map_or(3, |r| r.clique_size);
    writeln!(out, "threshold,method,n_{size}cliques,in_pmfg,percent")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.threshold,
            r.method,
            r.total,
            r.in_pmfg,
            opt(r.percent_in_pmfg)
        )?;
    }
    Ok(())
}

pub fn write_metrics(rows: &[MetricRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.level,
            r.threshold,
            r.nodes,
            opt(r.ari),
            opt(r.awi),
            r.degenerate
        )?;
    }
    Ok(())
}

pub fn write_scatter(
    scatter: &Scatter,
    elements: &[String],
    mut out: impl Write,
) -> io::Result<()> {
    writeln!(out, "{SCATTER_HEADER}")?;
    for p in &scatter.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            elements[p.link.0], elements[p.link.1], p.row_value, p.pair_value, p.same_sector
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::BootstrapMethod;

    #[test]
    fn undefined_percent_renders_as_dashes() {
        let reports = [
            CliqueReport {
                method: BootstrapMethod::Row,
                threshold: 550,
                clique_size: 3,
                total: 0,
                in_pmfg: 0,
                percent_in_pmfg: None,
            },
            CliqueReport {
                method: BootstrapMethod::Row,
                threshold: 500,
                clique_size: 3,
                total: 1,
                in_pmfg: 1,
                percent_in_pmfg: Some(100.0),
            },
        ];
        let mut out = Vec::new();
        write_cliques(&reports, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            format!("{CLIQUES_HEADER}\n550,row,0,0,--\n500,row,1,1,100\n")
        );
    }
}
