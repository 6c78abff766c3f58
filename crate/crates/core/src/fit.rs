//! Running one or many chains of either model and reducing them to a point
//! estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{consensus_ppm, estimate_map, trace_ppm, PointEstimate, PosteriorPairwiseMatrix};
use crate::model::NigPrior;
use crate::sampling::derive_seed;
use crate::trace::ChainTrace;
use crate::weights::WeightMatrix;
use crate::wsbm::{run_wsbm, ChainConfig};
use crate::wsibm::run_wsibm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "model")]
pub enum ModelSpec {
    Wsbm { k: usize, eta: Vec<f64> },
    Wsibm { alpha: f64, k_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Stored draw closest to the posterior pairwise matrix.
    #[default]
    Ppm,
    /// Stored draw with the largest joint posterior density.
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub model: ModelSpec,
    pub iterations: usize,
    pub burn_in: usize,
    pub prior: NigPrior,
}

/// Seed of chain `index` for a run with base seed `base`.
pub fn chain_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, index as u64)
}

pub fn run_chain(w: &WeightMatrix, settings: &FitSettings, seed: u64) -> Result<ChainTrace> {
    let config = ChainConfig {
        iterations: settings.iterations,
        burn_in: settings.burn_in,
        seed,
    };
    match &settings.model {
        ModelSpec::Wsbm { k, eta } => run_wsbm(w, &config, *k, &settings.prior, eta),
        ModelSpec::Wsibm { alpha, k_max } => run_wsibm(w, &config, &settings.prior, *alpha, *k_max),
    }
}

/// Runs `chains` independent chains in parallel; chain `i` uses
/// `chain_seed(base_seed, i)`. Output order is chain order.
pub fn run_chains(
    w: &WeightMatrix,
    settings: &FitSettings,
    chains: usize,
    base_seed: u64,
) -> Result<Vec<ChainTrace>> {
    if chains == 0 {
        return Err(Error::InvalidParameter("need at least one chain".into()));
    }
    (0..chains)
        .into_par_iter()
        .map(|i| run_chain(w, settings, chain_seed(base_seed, i)))
        .collect()
}

/// Point estimate and pooled co-clustering matrix over all chains.
pub fn point_estimate(
    traces: &[ChainTrace],
    estimator: Estimator,
    w: &WeightMatrix,
) -> Result<(PointEstimate, PosteriorPairwiseMatrix)> {
    match estimator {
        Estimator::Ppm => {
            let c = consensus_ppm(traces)?;
            Ok((c.estimate, c.ppm))
        }
        Estimator::Map => {
            let mut ppm = PosteriorPairwiseMatrix::new(w.n());
            let mut best: Option<PointEstimate> = None;
            for (chain, t) in traces.iter().enumerate() {
                ppm.merge(&trace_ppm(t))?;
                let mut e = estimate_map(t, w)?;
                e.index.chain = chain;
                if best.as_ref().is_none_or(|b| e.score > b.score) {
                    best = Some(e);
                }
            }
            let best = best.ok_or_else(|| Error::InvalidInput("no chains".into()))?;
            Ok((best, ppm))
        }
    }
}
