//! Synthetic benchmark networks, clustering-agreement metrics and the
//! replication harness.

mod benchmark;
mod metrics;
mod simulate;

pub use benchmark::{
    run_benchmark, BenchMethod, BenchmarkCase, BenchmarkReport, BenchmarkRow, BenchmarkSummary,
    EtaChoice, MethodConfig, RandomKModel,
};
pub use metrics::{ari, ari_from_counts, nmi, pair_counts, PairCounts};
pub use simulate::{simulate_network, PlantedNetwork, SimulationSpec, ThetaJson};
