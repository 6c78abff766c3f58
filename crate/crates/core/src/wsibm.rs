//! Blocked Gibbs sampler for the weighted stochastic infinite block model,
//! using a Dirichlet process truncated at `k_max` components.
//!
//! Per iteration: stick variables `V_k | z ~ Beta(1 + n_k, alpha + sum_{l>k} n_l)`
//! with `V_{k_max} = 1`, then labels, then block parameters for all
//! `k_max x k_max` blocks (empty blocks are drawn from the prior).

use rand::Rng;

use crate::error::{Error, Result};
use crate::gibbs::{draw_theta, log_weights, LabelSweep};
use crate::model::{
    block_loglik_from_stats, BlockParameters, BlockStats, CommunityAssignment, NigPrior,
};
use crate::sampling::{chain_rng, sample_beta};
use crate::trace::{ChainTrace, ModelKind, ThetaDraw};
use crate::wsbm::{ChainConfig, INIT_MU, INIT_SIGMA2};
use crate::weights::WeightMatrix;

pub const DEFAULT_K_MAX: usize = 20;
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Concentration used for the microbiome network fit.
pub const REAL_DATA_ALPHA: f64 = 0.1;

/// Truncated stick-breaking weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StickBreakingWeights {
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
}

impl StickBreakingWeights {
    /// Builds `rho_k = v_k * prod_{s<k} (1 - v_s)` for `k < k_max`, with the
    /// last weight taking the remaining mass. `v` must end in 1.
    pub fn from_sticks(v: Vec<f64>, alpha: f64) -> Self {
        let k_max = v.len();
        let mut rho = Vec::with_capacity(k_max);
        let mut remaining = 1.0;
        let mut assigned = 0.0;
        for &vk in &v[..k_max - 1] {
            let r = vk * remaining;
            rho.push(r);
            assigned += r;
            remaining *= 1.0 - vk;
        }
        rho.push((1.0 - assigned).max(0.0));
        StickBreakingWeights { rho, v, alpha }
    }

    pub fn k_max(&self) -> usize {
        self.rho.len()
    }
}

/// Draws stick variables from their Beta full conditionals and composes the
/// weights.
pub fn sample_sticks<R: Rng + ?Sized>(
    z: &CommunityAssignment,
    alpha: f64,
    rng: &mut R,
) -> StickBreakingWeights {
    let counts = z.counts();
    let k_max = counts.len();
    let mut tail: usize = counts.iter().sum();
    let mut v = Vec::with_capacity(k_max);
    for &nk in &counts[..k_max - 1] {
        tail -= nk;
        v.push(sample_beta(1.0 + nk as f64, alpha + tail as f64, rng));
    }
    v.push(1.0);
    StickBreakingWeights::from_sticks(v, alpha)
}

/// One sequential label sweep with stick-breaking weights.
pub fn sample_z_infinite<R: Rng + ?Sized>(
    w: &WeightMatrix,
    theta: &BlockParameters,
    sticks: &StickBreakingWeights,
    z: &CommunityAssignment,
    rng: &mut R,
) -> CommunityAssignment {
    let mut z = z.clone();
    LabelSweep::new(theta).sweep(w, &log_weights(&sticks.rho), &mut z, true, rng);
    z
}

/// Runs one truncated-DP chain.
pub fn run_wsibm(
    w: &WeightMatrix,
    config: &ChainConfig,
    prior: &NigPrior,
    alpha: f64,
    k_max: usize,
) -> Result<ChainTrace> {
    config.validate()?;
    prior.validate()?;
    if k_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "k_max must be at least 2, got {k_max}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if w.n() < 2 {
        return Err(Error::InvalidInput("network needs at least two nodes".into()));
    }

    let mut rng = chain_rng(config.seed);
    let labels = (0..w.n()).map(|_| rng.random_range(0..k_max)).collect();
    let mut z = CommunityAssignment::new(labels, k_max)?;
    let mut theta = BlockParameters::constant(k_max, INIT_MU, INIT_SIGMA2);

    let kept = config.kept();
    let mut trace = ChainTrace {
        model: ModelKind::Wsibm,
        n: w.n(),
        k_max,
        seed: config.seed,
        iterations: config.iterations,
        burn_in: config.burn_in,
        z_draws: Vec::with_capacity(kept),
        theta_draws: Vec::with_capacity(kept),
        weight_draws: Vec::with_capacity(kept),
        stick_draws: Vec::with_capacity(kept),
        loglik_draws: Vec::with_capacity(kept),
        k_draws: Vec::with_capacity(kept),
    };

    for t in 0..config.iterations {
        let sticks = sample_sticks(&z, alpha, &mut rng);
        LabelSweep::new(&theta).sweep(w, &log_weights(&sticks.rho), &mut z, true, &mut rng);
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
            trace.weight_draws.push(sticks.rho);
            trace.stick_draws.push(sticks.v);
            trace.loglik_draws.push(loglik);
        }
    }
    Ok(trace)
}
