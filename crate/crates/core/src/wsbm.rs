//! Blocked Gibbs sampler for the finite weighted stochastic block model.
//!
//! Each iteration updates the labels `z` node by node, then the community
//! probabilities `tau | z ~ Dir(n + eta)`, then every block's `(mu, sigma2)`
//! from its normal-inverse-gamma posterior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{draw_theta, log_weights, LabelSweep};
use crate::model::{
    block_loglik_from_stats, BlockParameters, BlockStats, CommunityAssignment, NigPrior,
};
use crate::sampling::{chain_rng, sample_dirichlet};
use crate::trace::{ChainTrace, ModelKind, ThetaDraw};
use crate::weights::WeightMatrix;

/// Initial block mean and variance for every block.
pub const INIT_MU: f64 = 0.0;
pub const INIT_SIGMA2: f64 = 0.1;

/// Community probabilities `tau` and their Dirichlet hyperparameters `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMixtureWeights {
    pub tau: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "need iterations > burn_in >= 0, got iterations = {}, burn_in = {}",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }

    /// Number of stored draws.
    pub fn kept(&self) -> usize {
        self.iterations - self.burn_in
    }
}

/// Dirichlet hyperparameter schemes for the finite model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme")]
pub enum EtaScheme {
    /// `eta = (1, .., 1)`.
    Flat,
    /// `eta_l = 100 * k_ref` for every community.
    Scaled { k_ref: usize },
}

impl EtaScheme {
    pub fn eta(&self, k: usize) -> Vec<f64> {
        match *self {
            EtaScheme::Flat => vec![1.0; k],
            EtaScheme::Scaled { k_ref } => vec![100.0 * k_ref as f64; k],
        }
    }
}

/// One sequential label sweep for the finite model.
pub fn sample_z_finite<R: Rng + ?Sized>(
    w: &WeightMatrix,
    theta: &BlockParameters,
    weights: &FiniteMixtureWeights,
    z: &CommunityAssignment,
    rng: &mut R,
) -> CommunityAssignment {
    let mut z = z.clone();
    LabelSweep::new(theta).sweep(w, &log_weights(&weights.tau), &mut z, true, rng);
    z
}

/// Conditional label probabilities `p_jl` for node `j` with all other
/// labels held fixed.
pub fn label_probabilities(
    w: &WeightMatrix,
    theta: &BlockParameters,
    weights: &[f64],
    z: &CommunityAssignment,
    j: usize,
) -> Vec<f64> {
    LabelSweep::new(theta)
        .probabilities(w, &log_weights(weights), z, j, true)
        .to_vec()
}

/// `tau | z, eta ~ Dir(n_1 + eta_1, .., n_K + eta_K)`.
pub fn sample_tau<R: Rng + ?Sized>(
    z: &CommunityAssignment,
    eta: &[f64],
    rng: &mut R,
) -> FiniteMixtureWeights {
    assert_eq!(z.k_max(), eta.len(), "eta length must equal K");
    let alpha: Vec<f64> = z
        .counts()
        .iter()
        .zip(eta)
        .map(|(&c, &e)| c as f64 + e)
        .collect();
    FiniteMixtureWeights {
        tau: sample_dirichlet(&alpha, rng),
        eta: eta.to_vec(),
    }
}

/// Draws all block parameters from their conjugate posteriors given `z`.
pub fn sample_theta<R: Rng + ?Sized>(
    w: &WeightMatrix,
    z: &CommunityAssignment,
    prior: &NigPrior,
    rng: &mut R,
) -> BlockParameters {
    draw_theta(&BlockStats::compute(w, z), prior, rng)
}

/// Runs one finite-model chain with `k` communities and Dirichlet
/// hyperparameters `eta`.
pub fn run_wsbm(
    w: &WeightMatrix,
    config: &ChainConfig,
    k: usize,
    prior: &NigPrior,
    eta: &[f64],
) -> Result<ChainTrace> {
    run_finite(w, config, k, prior, eta, true)
}

pub(crate) fn run_finite(
    w: &WeightMatrix,
    config: &ChainConfig,
    k: usize,
    prior: &NigPrior,
    eta: &[f64],
    likelihood: bool,
) -> Result<ChainTrace> {
    config.validate()?;
    prior.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    if eta.len() != k || eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "eta must have {k} positive finite entries"
        )));
    }
    if w.n() < 2 {
        return Err(Error::InvalidInput("network needs at least two nodes".into()));
    }

    let mut rng = chain_rng(config.seed);
    let labels = (0..w.n()).map(|_| rng.random_range(0..k)).collect();
    let mut z = CommunityAssignment::new(labels, k)?;
    let mut theta = BlockParameters::constant(k, INIT_MU, INIT_SIGMA2);
    let mut tau = vec![1.0 / k as f64; k];

    let kept = config.kept();
    let mut trace = ChainTrace {
        model: ModelKind::Wsbm,
        n: w.n(),
        k_max: k,
        seed: config.seed,
        iterations: config.iterations,
        burn_in: config.burn_in,
        z_draws: Vec::with_capacity(kept),
        theta_draws: Vec::with_capacity(kept),
        weight_draws: Vec::with_capacity(kept),
        stick_draws: Vec::new(),
        loglik_draws: Vec::with_capacity(kept),
        k_draws: Vec::with_capacity(kept),
    };

    for t in 0..config.iterations {
        LabelSweep::new(&theta).sweep(w, &log_weights(&tau), &mut z, likelihood, &mut rng);
        tau = sample_tau(&z, eta, &mut rng).tau;
        let stats = BlockStats::compute(w, &z);
        theta = draw_theta(&stats, prior, &mut rng);

        let loglik = block_loglik_from_stats(&stats, &theta);
        if !loglik.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-likelihood at iteration {} (seed {})",
                t + 1,
                config.seed
            )));
        }
        if t >= config.burn_in {
            trace.k_draws.push(z.num_occupied());
            trace.theta_draws.push(ThetaDraw::from_params(&theta, &z));
            trace.z_draws.push(z.clone());
            trace.weight_draws.push(tau.clone());
            trace.loglik_draws.push(loglik);
        }
    }
    Ok(trace)
}
