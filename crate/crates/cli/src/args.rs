use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mstboot::{BootstrapMethod, PanelFormat, SectorLevel, SynthSpec};

/// Bootstrap validation of MST and PMFG links in correlation networks.
#[derive(Debug, Parser)]
#[command(name = "mstboot", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and write all tables plus a manifest.
    Analyze(AnalyzeArgs),
    /// Minimum spanning tree of the sample correlation matrix.
    Mst(NetworkArgs),
    /// Planar maximally filtered graph of the sample correlation matrix.
    Pmfg(NetworkArgs),
    /// Bootstrap tallies and their histogram.
    Bootstrap(BootstrapArgs),
    /// Eigenvalues of one pair-bootstrap replica.
    Spectrum(SpectrumArgs),
    /// ARI/AWI curves against the sector map, plus the association test.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Returns panel (CSV).
    #[arg(long, conflicts_with_all = ["synthetic", "open", "close"])]
    pub panel: Option<PathBuf>,
    /// Opening prices; returns are ln(close / open).
    #[arg(long, requires = "close", conflicts_with = "synthetic")]
    pub open: Option<PathBuf>,
    /// Closing prices, same layout as --open.
    #[arg(long, requires = "open", conflicts_with = "synthetic")]
    pub close: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Wide)]
    pub format: FormatArg,
    /// Factor-model panel, e.g. `n=50,sectors=5,T=250,m=0.3,s=0.5`.
    #[arg(long, value_name = "KEY=VALUE,...")]
    pub synthetic: Option<SynthArg>,
    /// Sector map CSV `element,sector,subsector`.
    #[arg(long)]
    pub sectors: Option<PathBuf>,
    /// Bootstrap master seed; also seeds --synthetic unless it sets `seed=`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BootArgs {
    #[arg(long, value_delimiter = ',', default_values_t = BootstrapMethod::ALL)]
    pub methods: Vec<BootstrapMethod>,
    /// Number of bootstrap replicas [default: 1000].
    #[arg(long, short = 'B')]
    pub replicas: Option<u32>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "MSTBOOT_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// `start:stop:step` or a comma list [default: B-B/50 down to B/50].
    #[arg(long)]
    pub thresholds: Option<ThresholdSpec>,
    /// Keep links with count >= threshold instead of > threshold.
    #[arg(long)]
    pub inclusive: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Require the sector-dependent outputs.
    #[arg(long)]
    pub metrics: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LevelArg::Sector, LevelArg::Subsector])]
    pub levels: Vec<LevelArg>,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also dump the correlation matrix.
    #[arg(long)]
    pub matrix: bool,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = BootstrapMethod::Pair)]
    pub method: BootstrapMethod,
    /// Replica index.
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Shrink towards the identity until the spectrum is >= --floor.
    #[arg(long)]
    pub shrink: bool,
    #[arg(long, default_value_t = mstboot::DEFAULT_SPECTRAL_FLOOR)]
    pub floor: f64,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Existing tally CSVs; bootstraps afresh when absent.
    #[arg(long)]
    pub tally: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LevelArg::Sector, LevelArg::Subsector])]
    pub levels: Vec<LevelArg>,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Wide,
    Long,
}

impl From<FormatArg> for PanelFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Wide => PanelFormat::WideCsv,
            FormatArg::Long => PanelFormat::LongCsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Sector,
    Subsector,
}

impl From<LevelArg> for SectorLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Sector => SectorLevel::Sector,
            LevelArg::Subsector => SectorLevel::Subsector,
        }
    }
}

/// `--synthetic` overrides on top of the reference factor model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthArg {
    n: Option<usize>,
    sectors: Option<usize>,
    t: Option<usize>,
    m: Option<f64>,
    s: Option<f64>,
    noise: Option<f64>,
    seed: Option<u64>,
}

impl SynthArg {
    pub fn resolve(&self, default_seed: u64) -> SynthSpec {
        let base = SynthSpec::reference(self.seed.unwrap_or(default_seed));
        SynthSpec {
            n_elements: self.n.unwrap_or(base.n_elements),
            n_sectors: self.sectors.unwrap_or(base.n_sectors),
            n_times: self.t.unwrap_or(base.n_times),
            market_loading: self.m.unwrap_or(base.market_loading),
            sector_loading: self.s.unwrap_or(base.sector_loading),
            noise_scale: self.noise.unwrap_or(base.noise_scale),
            seed: base.seed,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("bad value {value:?} for {key}"))
}

impl FromStr for SynthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = SynthArg::default();
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("expected KEY=VALUE, got {item:?}"))?;
            match key.trim() {
                "n" => out.n = Some(parse_value(key, value)?),
                "sectors" => out.sectors = Some(parse_value(key, value)?),
                "T" | "t" => out.t = Some(parse_value(key, value)?),
                "m" => out.m = Some(parse_value(key, value)?),
                "s" => out.s = Some(parse_value(key, value)?),
                "noise" => out.noise = Some(parse_value(key, value)?),
                "seed" => out.seed = Some(parse_value(key, value)?),
                other => {
                    return Err(format!(
                        "unknown key {other:?} (expected n, sectors, T, m, s, noise, seed)"
                    ))
                }
            }
        }
        Ok(out)
    }
}

/// Thresholds given as `start:stop:step` (inclusive, either direction) or
/// as a comma-separated list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThresholdSpec {
    Range { start: u32, stop: u32, step: u32 },
    List(Vec<u32>),
}

impl ThresholdSpec {
    pub fn expand(&self) -> Vec<u32> {
        match self {
            ThresholdSpec::List(v) => v.clone(),
            ThresholdSpec::Range { start, stop, step } => {
                let (lo, hi) = if start <= stop {
                    (*start, *stop)
                } else {
                    (*stop, *start)
                };
                (lo..=hi).step_by(*step as usize).collect()
            }
        }
    }
}

impl FromStr for ThresholdSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, stop, step] => {
                let step: u32 = parse_value("step", step)?;
                if step == 0 {
                    return Err("step must be positive".into());
                }
                Ok(ThresholdSpec::Range {
                    start: parse_value("start", start)?,
                    stop: parse_value("stop", stop)?,
                    step,
                })
            }
            [list] => list
                .split(',')
                .map(|v| parse_value("threshold", v))
                .collect::<Result<Vec<u32>, _>>()
                .map(ThresholdSpec::List),
            _ => Err(format!("expected START:STOP:STEP or a list, got {s:?}")),
        }
    }
}
