mod args;
mod manifest;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::info;
use serde::Serialize;
use serde_json::json;

use mstboot::bootstrap::DEFAULT_REPLICAS;
use mstboot::correlation::{symmetric_spectrum, write_matrix_csv};
use mstboot::pipeline::{write_network, TallySummary};
use mstboot::report;
use mstboot::{
    analyze, default_thresholds, distinct_link_count, load_panel, load_sectors, metric_curves, mst,
    pearson, pmfg, possible_links, replica, returns_from_prices, run_bootstrap, scatter,
    sector_association_test, shrink_to_psd, spectrum, synthesize_panel, to_distance, write_outputs,
    AnalysisConfig, BootstrapConfig, BootstrapMethod, BootstrapTally, Error, ReturnsPanel,
    SectorLevel, SectorMap, StageContext, ThresholdRule,
};

use args::{
    AnalyzeArgs, BootArgs, BootstrapArgs, Cli, Command, InputArgs, MetricsArgs, NetworkArgs,
    SpectrumArgs,
};
use manifest::{InputRecord, Manifest};

/// Exit code for invalid requests detected before any stage runs.
const EXIT_USAGE: u8 = 2;
const EXIT_FAILURE: u8 = 1;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_FAILURE,
            message: format!("stage '{stage}' failed: {err}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Stage { stage, source } => Failure::stage(stage, source),
            other => Failure::stage("run", other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let outcome = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Mst(a) => cmd_network(a, "mst"),
        Command::Pmfg(a) => cmd_network(a, "pmfg"),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Loaded {
    panel: ReturnsPanel,
    sectors: Option<SectorMap>,
    record: InputRecord,
}

fn load_input(input: &InputArgs) -> CliResult<Loaded> {
    info!("load input");
    let sectors_file = match &input.sectors {
        Some(path) => Some(load_sectors(path).map_err(|e| Failure::stage("load sectors", e))?),
        None => None,
    };
    let (panel, planted, record) = if let Some(spec) = &input.synthetic {
        let spec = spec.resolve(input.seed);
        let (panel, planted) =
            synthesize_panel(&spec).map_err(|e| Failure::stage("synthesize", e))?;
        (panel, Some(planted), InputRecord::synthetic(spec))
    } else if let Some(path) = &input.panel {
        let format = input.format.into();
        let panel = load_panel(path, format).map_err(|e| Failure::stage("load panel", e))?;
        (panel, None, InputRecord::panel(path, format)?)
    } else if let (Some(open), Some(close)) = (&input.open, &input.close) {
        let format = input.format.into();
        let open_panel = load_panel(open, format).map_err(|e| Failure::stage("load prices", e))?;
        let close_panel =
            load_panel(close, format).map_err(|e| Failure::stage("load prices", e))?;
        let panel = returns_from_prices(&open_panel, &close_panel)
            .map_err(|e| Failure::stage("returns from prices", e))?;
        (panel, None, InputRecord::prices(open, close, format)?)
    } else {
        return Err(Failure::usage(
            "no input: give --panel, --open/--close or --synthetic",
        ));
    };
    let record = match &input.sectors {
        Some(path) => record.with_sectors(path)?,
        None => record,
    };
    let sectors = sectors_file.or(planted);
    if let Some(s) = &sectors {
        s.check_covers(panel.elements())
            .map_err(|e| Failure::stage("load sectors", e))?;
    }
    info!(
        "panel: {} elements, {} records",
        panel.n_elements(),
        panel.n_times()
    );
    Ok(Loaded {
        panel,
        sectors,
        record,
    })
}

/// Fails early when sector-dependent output is requested without a usable
/// sector map.
fn check_sector_source(input: &InputArgs) -> CliResult<()> {
    match &input.sectors {
        Some(path) if !path.is_file() => Err(Failure::usage(format!(
            "sector map required: {} not found",
            path.display()
        ))),
        None if input.synthetic.is_none() => Err(Failure::usage(
            "sector map required: pass --sectors FILE (element,sector,subsector)",
        )),
        _ => Ok(()),
    }
}

fn require_sectors(loaded: &Loaded) -> CliResult<&SectorMap> {
    loaded.sectors.as_ref().ok_or_else(|| {
        Failure::usage("sector map required: pass --sectors FILE (element,sector,subsector)")
    })
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::stage("output", format!("{}: {e}", dir.display())))
}

fn write_file(
    dir: &Path,
    name: &str,
    written: &mut Vec<PathBuf>,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> CliResult<()> {
    let path = dir.join(name);
    let result = fs::File::create(&path).and_then(|file| {
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()
    });
    result.map_err(|e| Failure::stage("output", format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn json_line<T: Serialize>(
    value: &T,
) -> impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()> + '_ {
    move |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    }
}

fn resolve_thresholds(boot: &BootArgs) -> CliResult<Vec<u32>> {
    let replicas = boot.replicas.unwrap_or(DEFAULT_REPLICAS);
    let mut thresholds = match &boot.thresholds {
        Some(spec) => spec.expand(),
        None => default_thresholds(replicas),
    };
    if let Some(t) = thresholds.iter().find(|&&t| t > replicas) {
        return Err(Failure::usage(format!(
            "threshold {t} outside [0, {replicas}]"
        )));
    }
    thresholds.sort_unstable_by(|a, b| b.cmp(a));
    thresholds.dedup();
    Ok(thresholds)
}

fn rule(boot: &BootArgs) -> ThresholdRule {
    if boot.inclusive {
        ThresholdRule::Inclusive
    } else {
        ThresholdRule::Strict
    }
}

fn methods(boot: &BootArgs) -> CliResult<Vec<BootstrapMethod>> {
    let mut m = boot.methods.clone();
    m.sort();
    m.dedup();
    if m.is_empty() {
        return Err(Failure::usage("select at least one method"));
    }
    Ok(m)
}

fn boot_params(boot: &BootArgs, seed: u64) -> CliResult<serde_json::Value> {
    Ok(json!({
        "methods": methods(boot)?,
        "replicas": boot.replicas.unwrap_or(DEFAULT_REPLICAS),
        "master_seed": seed,
        "thresholds": resolve_thresholds(boot)?,
        "rule": rule(boot),
        "workers": boot.workers,
    }))
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    if a.metrics {
        check_sector_source(&a.input)?;
    }
    let loaded = load_input(&a.input)?;
    let sectors = if a.metrics {
        Some(require_sectors(&loaded)?)
    } else {
        loaded.sectors.as_ref()
    };
    let config = AnalysisConfig {
        methods: methods(&a.boot)?,
        replicas: a.boot.replicas.unwrap_or(DEFAULT_REPLICAS),
        master_seed: a.input.seed,
        thresholds: resolve_thresholds(&a.boot)?,
        rule: rule(&a.boot),
        workers: a.boot.workers,
        levels: a.levels.iter().map(|&l| l.into()).collect(),
    };
    prepare_out(&a.out)?;
    let analysis = analyze(&loaded.panel, sectors, &config, |stage| info!("{stage}"))?;
    info!("write outputs");
    let mut written =
        write_outputs(&analysis, &loaded.panel, &a.out).map_err(|e| Failure::stage("output", e))?;
    for s in analysis.tally_summaries() {
        info!(
            "{}: {} distinct links of {}",
            s.method, s.distinct_links, s.possible_links
        );
    }
    if let Some(r) = &analysis.association {
        info!(
            "association test: table {:?}, p = {}",
            r.table,
            r.p_value
                .map_or_else(|| "undefined".into(), |p| format!("{p:e}"))
        );
    }
    let params = serde_json::to_value(&config).map_err(|e| Failure::stage("manifest", e))?;
    Manifest::new("analyze", loaded.record, params, &a.out, &mut written)
        .and_then(|m| m.write(&a.out))?;
    Ok(())
}

fn cmd_network(a: &NetworkArgs, kind: &'static str) -> CliResult<()> {
    let loaded = load_input(&a.input)?;
    prepare_out(&a.out)?;
    info!("correlation");
    let corr = pearson(&loaded.panel).stage("correlation")?;
    info!("{kind}");
    let net = if kind == "mst" {
        mst(&to_distance(&corr))
    } else {
        pmfg(&corr).stage("pmfg")?
    };
    let mut written = Vec::new();
    write_network(&a.out, kind, &net, loaded.panel.elements(), &mut written)
        .map_err(|e| Failure::stage("output", e))?;
    if a.matrix {
        write_file(&a.out, "correlation.csv", &mut written, |o| {
            write_matrix_csv(corr.n(), corr.values(), loaded.panel.elements(), o)
        })?;
    }
    let params = json!({ "matrix": a.matrix });
    Manifest::new(kind, loaded.record, params, &a.out, &mut written).and_then(|m| m.write(&a.out))
}

fn bootstrap_all(
    panel: &ReturnsPanel,
    boot: &BootArgs,
    seed: u64,
) -> CliResult<Vec<BootstrapTally>> {
    let replicas = boot.replicas.unwrap_or(DEFAULT_REPLICAS);
    methods(boot)?
        .into_iter()
        .map(|method| {
            info!("bootstrap ({method}, {replicas} replicas)");
            let config = BootstrapConfig::new(method, replicas, seed).with_workers(boot.workers);
            run_bootstrap(panel, &config).map_err(|e| Failure::stage("bootstrap", e))
        })
        .collect()
}

fn cmd_bootstrap(a: &BootstrapArgs) -> CliResult<()> {
    let loaded = load_input(&a.input)?;
    prepare_out(&a.out)?;
    let tallies = bootstrap_all(&loaded.panel, &a.boot, a.input.seed)?;
    let mut written = Vec::new();
    let elements = loaded.panel.elements();
    for t in &tallies {
        write_file(
            &a.out,
            &format!("tally_{}.csv", t.method()),
            &mut written,
            |o| t.write_csv(elements, o),
        )?;
    }
    let refs: Vec<&BootstrapTally> = tallies.iter().collect();
    write_file(&a.out, "histogram.csv", &mut written, |o| {
        report::write_histogram(&refs, o)
    })?;
    let summaries: Vec<TallySummary> = tallies
        .iter()
        .map(|t| TallySummary {
            method: t.method(),
            replicas: t.replicas(),
            distinct_links: distinct_link_count(t),
            possible_links: possible_links(t.n_nodes()),
            min_count: t.min_count(),
            max_count: t.max_count(),
        })
        .collect();
    for s in &summaries {
        info!(
            "{}: {} distinct links of {}",
            s.method, s.distinct_links, s.possible_links
        );
    }
    write_file(
        &a.out,
        "bootstrap_summary.json",
        &mut written,
        json_line(&summaries),
    )?;
    let params = boot_params(&a.boot, a.input.seed)?;
    Manifest::new("bootstrap", loaded.record, params, &a.out, &mut written)
        .and_then(|m| m.write(&a.out))
}

#[derive(Serialize)]
struct SpectrumReport {
    method: BootstrapMethod,
    replica: u64,
    replica_seed: u64,
    n: usize,
    negative_eigenvalues: usize,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    shrink: Option<ShrinkReport>,
}

#[derive(Serialize)]
struct ShrinkReport {
    floor: f64,
    alpha: f64,
    negative_eigenvalues_before: usize,
    min_eigenvalue_before: f64,
}

fn cmd_spectrum(a: &SpectrumArgs) -> CliResult<()> {
    if a.method == BootstrapMethod::Row {
        return Err(Failure::usage(
            "spectrum is only defined for the pair method: row replicas are positive semidefinite",
        ));
    }
    let loaded = load_input(&a.input)?;
    prepare_out(&a.out)?;
    let seed = mstboot::bootstrap::ReplicaSeedPolicy::new(a.input.seed).replica_seed(a.replica);
    info!("replica {} ({})", a.replica, a.method);
    let corr = replica(&loaded.panel, a.method, seed).stage("bootstrap")?;
    info!("spectrum");
    let raw = spectrum(&corr);
    let (eigenvalues, shrink) = if a.shrink {
        let (shrunk, alpha) = shrink_to_psd(&corr, a.floor).stage("shrink")?;
        let after = symmetric_spectrum(shrunk.n(), shrunk.values());
        let report = ShrinkReport {
            floor: a.floor,
            alpha,
            negative_eigenvalues_before: raw.negative_count(),
            min_eigenvalue_before: raw.min(),
        };
        (after, Some(report))
    } else {
        (raw, None)
    };
    let report = SpectrumReport {
        method: a.method,
        replica: a.replica,
        replica_seed: seed,
        n: corr.n(),
        negative_eigenvalues: eigenvalues.negative_count(),
        min_eigenvalue: eigenvalues.min(),
        max_eigenvalue: eigenvalues.max(),
        shrink,
    };
    info!(
        "{} negative eigenvalues, min {:e}",
        report.negative_eigenvalues, report.min_eigenvalue
    );
    let mut written = Vec::new();
    write_file(&a.out, "spectrum.csv", &mut written, |o| {
        writeln!(o, "rank,eigenvalue")?;
        for (k, l) in eigenvalues.eigenvalues.iter().enumerate() {
            writeln!(o, "{k},{l:.16e}")?;
        }
        Ok(())
    })?;
    write_file(&a.out, "spectrum.json", &mut written, json_line(&report))?;
    let params = json!({
        "method": a.method,
        "master_seed": a.input.seed,
        "replica": a.replica,
        "shrink": a.shrink,
        "floor": a.floor,
    });
    Manifest::new("spectrum", loaded.record, params, &a.out, &mut written)
        .and_then(|m| m.write(&a.out))
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult<()> {
    check_sector_source(&a.input)?;
    let loaded = load_input(&a.input)?;
    let sectors = require_sectors(&loaded)?;
    prepare_out(&a.out)?;
    let elements = loaded.panel.elements();
    let tallies = if a.tally.is_empty() {
        bootstrap_all(&loaded.panel, &a.boot, a.input.seed)?
    } else {
        a.tally
            .iter()
            .map(|path| {
                info!("read tally {}", path.display());
                let text = fs::read_to_string(path).map_err(|e| {
                    Failure::stage("load tally", format!("{}: {e}", path.display()))
                })?;
                BootstrapTally::parse_csv(&text, elements)
                    .map_err(|e| Failure::stage("load tally", e))
            })
            .collect::<CliResult<Vec<_>>>()?
    };
    let mut boot = a.boot.clone();
    if boot.replicas.is_none() {
        boot.replicas = tallies.first().map(|t| t.replicas());
    }
    if tallies.iter().any(|t| Some(t.replicas()) != boot.replicas) {
        return Err(Failure::usage("tallies disagree on the replica count"));
    }
    let thresholds = resolve_thresholds(&boot)?;
    info!("partition metrics");
    let mut rows = Vec::new();
    for t in &tallies {
        for &level in &a.levels {
            rows.extend(
                metric_curves(t, elements, sectors, level.into(), &thresholds, rule(&boot))
                    .stage("metrics")?,
            );
        }
    }
    let mut written = Vec::new();
    write_file(&a.out, "metrics.csv", &mut written, |o| {
        report::write_metrics(&rows, o)
    })?;
    let row = tallies.iter().find(|t| t.method() == BootstrapMethod::Row);
    let pair = tallies.iter().find(|t| t.method() == BootstrapMethod::Pair);
    if let (Some(row), Some(pair)) = (row, pair) {
        info!("scatter and association test");
        let s = scatter(row, pair, elements, sectors).stage("scatter")?;
        let test = sector_association_test(&s.points);
        write_file(&a.out, "scatter.csv", &mut written, |o| {
            report::write_scatter(&s, elements, o)
        })?;
        write_file(
            &a.out,
            "association_test.json",
            &mut written,
            json_line(&test),
        )?;
    }
    let mut params = boot_params(&boot, a.input.seed)?;
    params["tallies"] = json!(a.tally);
    params["levels"] = json!(a
        .levels
        .iter()
        .map(|&l| SectorLevel::from(l))
        .collect::<Vec<_>>());
    Manifest::new("metrics", loaded.record, params, &a.out, &mut written)
        .and_then(|m| m.write(&a.out))
}
