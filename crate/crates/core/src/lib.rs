//! Bootstrap validation of minimum spanning tree and planar maximally
//! filtered graph links estimated from a multivariate returns panel.
//!
//! The usual flow is [`load_panel`] or [`synthesize_panel`], then
//! [`run_bootstrap`] for each [`BootstrapMethod`], then threshold networks,
//! clique and partition statistics built from the resulting tallies.
//! [`analyze`] runs the whole chain.

pub mod bootstrap;
pub mod correlation;
pub mod data;
pub mod error;
pub mod filtering;
pub mod partitions;
pub mod pipeline;
pub mod report;
pub mod topology;

pub use bootstrap::{
    distinct_link_count, pair_replica, possible_links, replica, row_replica, run_bootstrap,
    BootstrapConfig, BootstrapMethod, BootstrapTally, ReplicaSeedPolicy,
};
pub use correlation::{
    correlation_distance, pearson, shrink_to_psd, spectrum, to_distance, CorrelationMatrix,
    DistanceMatrix, Spectrum, DEFAULT_SPECTRAL_FLOOR,
};
pub use data::{
    load_panel, load_sectors, returns_from_prices, synthesize_panel, PanelFormat, ReturnsPanel,
    SectorLevel, SectorMap, SynthSpec,
};
pub use error::{Error, Result, StageContext};
pub use filtering::{
    default_thresholds, is_planar, mst, pmfg, threshold_network, EdgeNetwork, Link, NetworkSummary,
    ThresholdRule,
};
pub use partitions::{
    ari, awi, fisher_exact, metric_curves, sector_association_test, AssociationDirection,
    AssociationReport, MetricRow, Partition,
};
pub use pipeline::{analyze, write_outputs, Analysis, AnalysisConfig};
pub use topology::{
    clique_pmfg_inclusion, components, count_cliques, mst_overlap_curve, scatter, threshold_scan,
    Components, Scatter, ScatterPoint,
};
