//! Node-by-node label update shared by the finite and stick-breaking
//! samplers.

use rand::Rng;

use crate::model::{BlockParameters, CommunityAssignment, BlockStats, NigPrior, PosteriorNig};
use crate::sampling::{
    normalize_log_weights, sample_categorical, sample_inverse_gamma, sample_normal,
};
use crate::weights::WeightMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-sweep cache of `theta` in the form the label update needs.
pub(crate) struct LabelSweep {
    k: usize,
    mu: Vec<f64>,
    half_log_norm: Vec<f64>,
    half_inv_var: Vec<f64>,
    count: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    occupied: Vec<usize>,
    logp: Vec<f64>,
}

impl LabelSweep {
    pub(crate) fn new(theta: &BlockParameters) -> Self {
        let k = theta.k();
        let mut mu = vec![0.0; k * k];
        let mut half_log_norm = vec![0.0; k * k];
        let mut half_inv_var = vec![0.0; k * k];
        for l in 0..k {
            for q in 0..k {
                let s2 = theta.sigma2(l, q);
                mu[l * k + q] = theta.mu(l, q);
                half_log_norm[l * k + q] = 0.5 * (LN_2PI + s2.ln());
                half_inv_var[l * k + q] = 0.5 / s2;
            }
        }
        LabelSweep {
            k,
            mu,
            half_log_norm,
            half_inv_var,
            count: vec![0.0; k],
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
            occupied: Vec::with_capacity(k),
            logp: vec![0.0; k],
        }
    }

    /// Unnormalized log posterior of each label for node `j`, written to
    /// `self.logp`. `log_weights[l]` is the log prior mass of label `l`.
    fn fill_log_posterior(
        &mut self,
        w: &WeightMatrix,
        log_weights: &[f64],
        z: &CommunityAssignment,
        j: usize,
        likelihood: bool,
    ) {
        let k = self.k;
        if !likelihood {
            self.logp.copy_from_slice(log_weights);
            return;
        }
        self.count.iter_mut().for_each(|x| *x = 0.0);
        self.sum.iter_mut().for_each(|x| *x = 0.0);
        self.sum_sq.iter_mut().for_each(|x| *x = 0.0);
        let labels = z.labels();
        for (i, &x) in w.row(j).iter().enumerate() {
            if i == j {
                continue;
            }
            let q = labels[i];
            self.count[q] += 1.0;
            self.sum[q] += x;
            self.sum_sq[q] += x * x;
        }
        self.occupied.clear();
        self.occupied.extend((0..k).filter(|&q| self.count[q] > 0.0));
        for l in 0..k {
            let lw = log_weights[l];
            if lw == f64::NEG_INFINITY {
                self.logp[l] = lw;
                continue;
            }
            let base = l * k;
            let mut acc = lw;
            for &q in &self.occupied {
                let (c, s1, s2) = (self.count[q], self.sum[q], self.sum_sq[q]);
                let m = self.mu[base + q];
                let sq_dev = s2 - 2.0 * m * s1 + c * m * m;
                acc -= c * self.half_log_norm[base + q] + sq_dev * self.half_inv_var[base + q];
            }
            self.logp[l] = acc;
        }
    }

    /// Normalized label probabilities for node `j` given the other labels.
    pub(crate) fn probabilities(
        &mut self,
        w: &WeightMatrix,
        log_weights: &[f64],
        z: &CommunityAssignment,
        j: usize,
        likelihood: bool,
    ) -> &[f64] {
        self.fill_log_posterior(w, log_weights, z, j, likelihood);
        normalize_log_weights(&mut self.logp);
        &self.logp
    }

    /// One sequential scan over nodes in index order, updating labels in place.
    pub(crate) fn sweep<R: Rng + ?Sized>(
        &mut self,
        w: &WeightMatrix,
        log_weights: &[f64],
        z: &mut CommunityAssignment,
        likelihood: bool,
        rng: &mut R,
    ) {
        for j in 0..z.n() {
            self.probabilities(w, log_weights, z, j, likelihood);
            let l = sample_categorical(&self.logp, rng);
            z.set(j, l);
        }
    }
}

pub(crate) fn log_weights(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// Draws every block `(l <= q)` from its NIG posterior: `sigma2` from
/// `IG(nu_p/2, ss_p/2)`, then `mu | sigma2` from `N(mu_p, sigma2/n_p)`.
pub(crate) fn draw_theta<R: Rng + ?Sized>(
    stats: &BlockStats,
    prior: &NigPrior,
    rng: &mut R,
) -> BlockParameters {
    let k = stats.k();
    let mut theta = BlockParameters::constant(k, 0.0, 1.0);
    for l in 0..k {
        for q in l..k {
            let post = PosteriorNig::from_summary(
                stats.n_edges(l, q),
                stats.mean(l, q),
                stats.sum_sq_dev(l, q),
                prior,
            );
            let s2 = sample_inverse_gamma(post.nu_p / 2.0, post.ss_p / 2.0, rng);
            let mu = sample_normal(post.mu_p, s2 / post.n_p, rng);
            theta.set(l, q, mu, s2);
        }
    }
    theta
}
