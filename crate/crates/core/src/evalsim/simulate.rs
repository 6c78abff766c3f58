//! Planted-partition weighted networks with normally distributed edge
//! weights and exponentially distributed block variances.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockParameters, CommunityAssignment};
use crate::sampling::{chain_rng, sample_normal};
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub k_true: usize,
    /// Community proportions `n_l / n`.
    pub proportions: Vec<f64>,
    /// Within-community means `mu_ll`.
    pub mu_diag: Vec<f64>,
    /// Between-community mean shared by every `l != q` block.
    pub mu_offdiag: f64,
    /// Rate of the exponential distribution of block variances (mean `1/rate`).
    pub sigma2_rate: f64,
    /// Randomly permute `mu_diag` across communities.
    pub permute_means: bool,
    pub seed: u64,
}

const K3_PROPORTIONS: [f64; 3] = [0.2, 0.5, 0.3];
const K3_MEANS: [f64; 3] = [-3.0, 0.0, 3.0];
const K7_PROPORTIONS: [f64; 7] = [0.1, 0.25, 0.15, 0.05, 0.15, 0.1, 0.2];
const K7_MEANS: [f64; 7] = [-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0];

impl SimulationSpec {
    /// Three communities with proportions (0.2, 0.5, 0.3) and within means
    /// (-3, 0, 3).
    pub fn three_communities(n: usize, seed: u64) -> Self {
        SimulationSpec {
            n,
            k_true: 3,
            proportions: K3_PROPORTIONS.to_vec(),
            mu_diag: K3_MEANS.to_vec(),
            mu_offdiag: 0.0,
            sigma2_rate: 0.1,
            permute_means: true,
            seed,
        }
    }

    /// Seven communities with within means -6, -4, .., 6.
    pub fn seven_communities(n: usize, seed: u64) -> Self {
        SimulationSpec {
            n,
            k_true: 7,
            proportions: K7_PROPORTIONS.to_vec(),
            mu_diag: K7_MEANS.to_vec(),
            mu_offdiag: 0.0,
            sigma2_rate: 0.1,
            permute_means: true,
            seed,
        }
    }

    /// Named benchmark cases: `case1..case3` are the three-community design
    /// at n = 50, 70, 100; `case4..case6` the seven-community design at
    /// n = 100, 150, 200.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        Ok(match name {
            "case1" => Self::three_communities(50, seed),
            "case2" => Self::three_communities(70, seed),
            "case3" => Self::three_communities(100, seed),
            "case4" => Self::seven_communities(100, seed),
            "case5" => Self::seven_communities(150, seed),
            "case6" => Self::seven_communities(200, seed),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset `{other}` (expected case1..case6)"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k_true == 0 {
            return bad("k_true must be positive".into());
        }
        if self.k_true > self.n {
            return bad(format!("k_true = {} exceeds n = {}", self.k_true, self.n));
        }
        if self.proportions.len() != self.k_true || self.mu_diag.len() != self.k_true {
            return bad(format!(
                "need {} proportions and within-community means, got {} and {}",
                self.k_true,
                self.proportions.len(),
                self.mu_diag.len()
            ));
        }
        if self.proportions.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("proportions must be non-negative".into());
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("proportions sum to {total}, not 1"));
        }
        if self.mu_diag.iter().any(|m| !m.is_finite()) || !self.mu_offdiag.is_finite() {
            return bad("block means must be finite".into());
        }
        if !(self.sigma2_rate > 0.0 && self.sigma2_rate.is_finite()) {
            return bad(format!("sigma2_rate must be positive, got {}", self.sigma2_rate));
        }
        Ok(())
    }

    /// Community sizes by largest-remainder rounding of `n * proportions`;
    /// equal remainders favour the lower community index.
    pub fn community_sizes(&self) -> Vec<usize> {
        largest_remainder(self.n, &self.proportions)
    }
}

pub(crate) fn largest_remainder(n: usize, proportions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    // guard against quotas like 24.999999999 from binary fractions
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - sizes[a] as f64;
        let rb = quotas[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &l in order.iter().take(n.saturating_sub(assigned)) {
        sizes[l] += 1;
    }
    sizes
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedNetwork {
    pub w: WeightMatrix,
    pub z_true: CommunityAssignment,
    pub theta_true: BlockParameters,
}

/// Generates a planted network. Nodes are assigned to communities in
/// contiguous runs; every unordered block draws `sigma2 ~ Exp(rate)` and
/// every edge `W_jk ~ N(mu, sigma2)` of its block.
pub fn simulate_network(spec: &SimulationSpec) -> Result<PlantedNetwork> {
    spec.validate()?;
    let mut rng = chain_rng(spec.seed);
    let k = spec.k_true;

    let mut mu_diag = spec.mu_diag.clone();
    if spec.permute_means {
        mu_diag.shuffle(&mut rng);
    }
    let exp = Exp::new(spec.sigma2_rate).expect("rate validated");
    let mut theta = BlockParameters::constant(k, spec.mu_offdiag, 1.0);
    for l in 0..k {
        for q in l..k {
            let mu = if l == q { mu_diag[l] } else { spec.mu_offdiag };
            let s2 = loop {
                let s2: f64 = exp.sample(&mut rng);
                if s2 > 0.0 {
                    break s2;
                }
            };
            theta.set(l, q, mu, s2);
        }
    }

    let sizes = spec.community_sizes();
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &s)| std::iter::repeat_n(l, s))
        .collect();
    let z_true = CommunityAssignment::new(labels, k)?;

    let n = spec.n;
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for i in (j + 1)..n {
            let (l, q) = (z_true.label(j), z_true.label(i));
            upper.push(sample_normal(theta.mu(l, q), theta.sigma2(l, q), &mut rng));
        }
    }
    let w = WeightMatrix::from_upper_triangle(n, &upper)?;
    Ok(PlantedNetwork { w, z_true, theta_true: theta })
}

/// Dense `k x k` block parameters for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaJson {
    pub k: usize,
    pub mu: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
}

impl From<&BlockParameters> for ThetaJson {
    fn from(t: &BlockParameters) -> Self {
        let k = t.k();
        ThetaJson {
            k,
            mu: (0..k).map(|l| (0..k).map(|q| t.mu(l, q)).collect()).collect(),
            sigma2: (0..k).map(|l| (0..k).map(|q| t.sigma2(l, q)).collect()).collect(),
        }
    }
}
