//! Partition, block parameters, block sufficient statistics and the
//! normal-inverse-gamma conjugate update shared by both samplers.
//!
//! Community labels are 0-based throughout the library (`0..k_max`); files
//! written by the CLI use 1-based labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hyperparameters of `NIG(mu0, n0, nu0/2, ss0/2)`:
/// `sigma2 ~ IG(nu0/2, ss0/2)` and `mu | sigma2 ~ N(mu0, sigma2/n0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub mu0: f64,
    pub n0: f64,
    pub nu0: f64,
    pub ss0: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        NigPrior {
            mu0: 0.0,
            n0: 1.0,
            nu0: 10.0,
            ss0: 0.1,
        }
    }
}

impl NigPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0.is_finite()
            && self.n0.is_finite()
            && self.nu0.is_finite()
            && self.ss0.is_finite()
            && self.n0 > 0.0
            && self.nu0 > 0.0
            && self.ss0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "NIG prior requires finite mu0 and n0, nu0, ss0 > 0, got {self:?}"
            )))
        }
    }
}

/// Community labels `z` with per-community counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be positive".into()));
        }
        let mut counts = vec![0; k_max];
        for (j, &l) in labels.iter().enumerate() {
            if l >= k_max {
                return Err(Error::InvalidInput(format!(
                    "node {} has label {} outside 1..={k_max}",
                    j + 1,
                    l + 1
                )));
            }
            counts[l] += 1;
        }
        Ok(CommunityAssignment { labels, counts })
    }

    /// All nodes in community 0.
    pub fn single(n: usize, k_max: usize) -> Self {
        Self::new(vec![0; n], k_max.max(1)).expect("label 0 is always valid")
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k_max(&self) -> usize {
        self.counts.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    #[inline]
    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    /// Moves node `j` to community `label`, keeping counts consistent.
    pub fn set(&mut self, j: usize, label: usize) {
        assert!(label < self.k_max(), "label {label} out of range");
        let old = self.labels[j];
        self.counts[old] -= 1;
        self.counts[label] += 1;
        self.labels[j] = label;
    }

    /// Number of non-empty communities.
    pub fn num_occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn occupied_labels(&self) -> Vec<usize> {
        (0..self.k_max()).filter(|&l| self.counts[l] > 0).collect()
    }

    /// Whether `j` and `k` share a community.
    #[inline]
    pub fn together(&self, j: usize, k: usize) -> bool {
        self.labels[j] == self.labels[k]
    }

    /// True when both assignments induce the same partition of the nodes.
    pub fn same_partition(&self, other: &CommunityAssignment) -> bool {
        if self.n() != other.n() {
            return false;
        }
        let mut fwd = vec![usize::MAX; self.k_max()];
        let mut bwd = vec![usize::MAX; other.k_max()];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            if fwd[a] == usize::MAX && bwd[b] == usize::MAX {
                fwd[a] = b;
                bwd[b] = a;
            } else if fwd[a] != b || bwd[b] != a {
                return false;
            }
        }
        true
    }
}

/// Number of non-empty communities in `z`.
pub fn count_k(z: &CommunityAssignment) -> usize {
    z.num_occupied()
}

#[inline]
fn block_index(k: usize, l: usize, q: usize) -> usize {
    if l <= q {
        l * k + q
    } else {
        q * k + l
    }
}

/// Symmetric block means and variances over `k x k` community pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParameters {
    k: usize,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl BlockParameters {
    pub fn constant(k: usize, mu: f64, sigma2: f64) -> Self {
        BlockParameters {
            k,
            mu: vec![mu; k * k],
            sigma2: vec![sigma2; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn mu(&self, l: usize, q: usize) -> f64 {
        self.mu[block_index(self.k, l, q)]
    }

    #[inline]
    pub fn sigma2(&self, l: usize, q: usize) -> f64 {
        self.sigma2[block_index(self.k, l, q)]
    }

    /// Sets block `(l, q)` and its mirror `(q, l)`.
    pub fn set(&mut self, l: usize, q: usize, mu: f64, sigma2: f64) {
        let i = block_index(self.k, l, q);
        self.mu[i] = mu;
        self.sigma2[i] = sigma2;
        let mirror = if l <= q { q * self.k + l } else { l * self.k + q };
        self.mu[mirror] = mu;
        self.sigma2[mirror] = sigma2;
    }

    pub fn validate(&self) -> Result<()> {
        for l in 0..self.k {
            for q in 0..self.k {
                let (a, b) = (l * self.k + q, q * self.k + l);
                if self.mu[a] != self.mu[b] || self.sigma2[a] != self.sigma2[b] {
                    return Err(Error::Numerical(format!(
                        "block parameters not symmetric at ({}, {})",
                        l + 1,
                        q + 1
                    )));
                }
                if !(self.sigma2[a] > 0.0 && self.sigma2[a].is_finite()) || !self.mu[a].is_finite()
                {
                    return Err(Error::Numerical(format!(
                        "invalid block parameters at ({}, {}): mu = {}, sigma2 = {}",
                        l + 1,
                        q + 1,
                        self.mu[a],
                        self.sigma2[a]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-block edge count, mean and sum of squared deviations, over unordered
/// edges. Only the `l <= q` half is stored; lookups are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    k: usize,
    n_edges: Vec<u64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl BlockStats {
    pub fn empty(k: usize) -> Self {
        BlockStats {
            k,
            n_edges: vec![0; k * k],
            mean: vec![0.0; k * k],
            m2: vec![0.0; k * k],
        }
    }

    /// Statistics for every block of `z` over `W`.
    pub fn compute(w: &WeightMatrix, z: &CommunityAssignment) -> Self {
        let mut stats = Self::empty(z.k_max());
        let labels = z.labels();
        for j in 0..w.n() {
            let row = w.row(j);
            let lj = labels[j];
            for k in (j + 1)..w.n() {
                stats.add_edge(lj, labels[k], row[k]);
            }
        }
        stats
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n_edges(&self, l: usize, q: usize) -> u64 {
        self.n_edges[block_index(self.k, l, q)]
    }

    /// Sample mean of the block's weights, 0 for an empty block.
    #[inline]
    pub fn mean(&self, l: usize, q: usize) -> f64 {
        self.mean[block_index(self.k, l, q)]
    }

    #[inline]
    pub fn sum_sq_dev(&self, l: usize, q: usize) -> f64 {
        self.m2[block_index(self.k, l, q)]
    }

    pub fn add_edge(&mut self, l: usize, q: usize, w: f64) {
        let i = block_index(self.k, l, q);
        self.n_edges[i] += 1;
        let n = self.n_edges[i] as f64;
        let d = w - self.mean[i];
        self.mean[i] += d / n;
        self.m2[i] += d * (w - self.mean[i]);
    }

    pub fn remove_edge(&mut self, l: usize, q: usize, w: f64) {
        let i = block_index(self.k, l, q);
        match self.n_edges[i] {
            0 => panic!("removing an edge from an empty block"),
            1 => {
                self.n_edges[i] = 0;
                self.mean[i] = 0.0;
                self.m2[i] = 0.0;
            }
            c => {
                let n = c as f64;
                let old_mean = (n * self.mean[i] - w) / (n - 1.0);
                self.m2[i] = (self.m2[i] - (w - old_mean) * (w - self.mean[i])).max(0.0);
                self.mean[i] = old_mean;
                self.n_edges[i] = c - 1;
            }
        }
    }

    /// Combines statistics from disjoint edge sets.
    pub fn merge(&mut self, other: &BlockStats) {
        assert_eq!(self.k, other.k, "merging stats of different sizes");
        for i in 0..self.n_edges.len() {
            let (na, nb) = (self.n_edges[i], other.n_edges[i]);
            if nb == 0 {
                continue;
            }
            if na == 0 {
                self.n_edges[i] = nb;
                self.mean[i] = other.mean[i];
                self.m2[i] = other.m2[i];
                continue;
            }
            let n = (na + nb) as f64;
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb as f64 / n;
            self.m2[i] += other.m2[i] + d * d * (na as f64) * (nb as f64) / n;
            self.n_edges[i] = na + nb;
        }
    }

    /// Moves node `j` to `label`, updating both `z` and the statistics for
    /// every edge incident to `j`.
    pub fn move_node(
        &mut self,
        w: &WeightMatrix,
        z: &mut CommunityAssignment,
        j: usize,
        label: usize,
    ) {
        let old = z.label(j);
        if old == label {
            return;
        }
        let row = w.row(j);
        for (k, &wjk) in row.iter().enumerate() {
            if k == j {
                continue;
            }
            let lk = z.label(k);
            self.remove_edge(old, lk, wjk);
            self.add_edge(label, lk, wjk);
        }
        z.set(j, label);
    }
}

/// Posterior NIG parameters of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorNig {
    pub mu_p: f64,
    pub n_p: f64,
    pub nu_p: f64,
    pub ss_p: f64,
}

impl PosteriorNig {
    pub fn from_summary(n_edges: u64, mean: f64, sum_sq_dev: f64, prior: &NigPrior) -> Self {
        let n = n_edges as f64;
        let n_p = n + prior.n0;
        PosteriorNig {
            mu_p: (n * mean + prior.n0 * prior.mu0) / n_p,
            n_p,
            nu_p: n + prior.nu0,
            ss_p: prior.ss0
                + sum_sq_dev
                + prior.n0 * n / n_p * (mean - prior.mu0) * (mean - prior.mu0),
        }
    }

    /// Log density of the NIG posterior at `(mu, sigma2)`.
    pub fn log_density(&self, mu: f64, sigma2: f64) -> f64 {
        let shape = self.nu_p / 2.0;
        let rate = self.ss_p / 2.0;
        let log_ig = shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * sigma2.ln() - rate / sigma2;
        log_ig + normal_logpdf(mu, self.mu_p, sigma2 / self.n_p)
    }
}

/// Conjugate update for block `(l, q)`.
pub fn posterior_nig(stats: &BlockStats, l: usize, q: usize, prior: &NigPrior) -> PosteriorNig {
    PosteriorNig::from_summary(
        stats.n_edges(l, q),
        stats.mean(l, q),
        stats.sum_sq_dev(l, q),
        prior,
    )
}

#[inline]
pub fn normal_logpdf(x: f64, mu: f64, sigma2: f64) -> f64 {
    let d = x - mu;
    -0.5 * (LN_2PI + sigma2.ln()) - d * d / (2.0 * sigma2)
}

/// Log-likelihood of `W` given `z` and `theta`, summed edge by edge over
/// unordered pairs.
pub fn block_loglik(w: &WeightMatrix, z: &CommunityAssignment, theta: &BlockParameters) -> f64 {
    let labels = z.labels();
    let mut total = 0.0;
    for j in 0..w.n() {
        let row = w.row(j);
        let lj = labels[j];
        for k in (j + 1)..w.n() {
            let lk = labels[k];
            total += normal_logpdf(row[k], theta.mu(lj, lk), theta.sigma2(lj, lk));
        }
    }
    total
}

/// The same log-likelihood evaluated through block sufficient statistics.
pub fn block_loglik_from_stats(stats: &BlockStats, theta: &BlockParameters) -> f64 {
    let mut total = 0.0;
    for l in 0..stats.k() {
        for q in l..stats.k() {
            let n = stats.n_edges(l, q);
            if n == 0 {
                continue;
            }
            let n = n as f64;
            let mu = theta.mu(l, q);
            let s2 = theta.sigma2(l, q);
            let d = stats.mean(l, q) - mu;
            total += -0.5 * n * (LN_2PI + s2.ln()) - (stats.sum_sq_dev(l, q) + n * d * d) / (2.0 * s2);
        }
    }
    total
}

/// Lanczos approximation of `ln Gamma(x)` for `x > 0` (g = 7, n = 9).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
