//! Stored post-burn-in draws of a chain, and their JSON-lines encoding.
//!
//! The file starts with one header object carrying `format_version`, followed
//! by one object per stored iteration. Labels are written 1-based.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockParameters, CommunityAssignment};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Wsbm,
    Wsibm,
}

/// Block parameters of one draw, restricted to communities that were occupied
/// at that draw. Parameters of empty communities are prior draws that touch
/// no edge and are not kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDraw {
    labels: Vec<usize>,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl ThetaDraw {
    pub fn from_params(theta: &BlockParameters, z: &CommunityAssignment) -> Self {
        let labels = z.occupied_labels();
        let m = labels.len();
        let mut mu = Vec::with_capacity(m * m);
        let mut sigma2 = Vec::with_capacity(m * m);
        for &l in &labels {
            for &q in &labels {
                mu.push(theta.mu(l, q));
                sigma2.push(theta.sigma2(l, q));
            }
        }
        ThetaDraw { labels, mu, sigma2 }
    }

    /// Occupied labels, ascending.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `(mu, sigma2)` of block `(l, q)`, if both communities were occupied.
    pub fn get(&self, l: usize, q: usize) -> Option<(f64, f64)> {
        let a = self.labels.binary_search(&l).ok()?;
        let b = self.labels.binary_search(&q).ok()?;
        let i = a * self.labels.len() + b;
        Some((self.mu[i], self.sigma2[i]))
    }

    fn relabeled(&self, perm: &[usize]) -> ThetaDraw {
        let m = self.labels.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| perm[self.labels[i]]);
        let labels = order.iter().map(|&i| perm[self.labels[i]]).collect();
        let mut mu = Vec::with_capacity(m * m);
        let mut sigma2 = Vec::with_capacity(m * m);
        for &a in &order {
            for &b in &order {
                mu.push(self.mu[a * m + b]);
                sigma2.push(self.sigma2[a * m + b]);
            }
        }
        ThetaDraw { labels, mu, sigma2 }
    }
}

/// Post-burn-in output of one chain. All draw sequences have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub model: ModelKind,
    pub n: usize,
    pub k_max: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub z_draws: Vec<CommunityAssignment>,
    pub theta_draws: Vec<ThetaDraw>,
    /// Mixture weights at each draw: `tau` for the finite model, `rho` for
    /// the stick-breaking model.
    pub weight_draws: Vec<Vec<f64>>,
    /// Stick variables `V_k` (stick-breaking model only, otherwise empty).
    pub stick_draws: Vec<Vec<f64>>,
    pub loglik_draws: Vec<f64>,
    pub k_draws: Vec<usize>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.z_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_draws.is_empty()
    }

    /// Most frequent number of occupied communities; ties go to the smaller K.
    pub fn modal_k(&self) -> Option<usize> {
        let mut hist = vec![0usize; self.k_max + 1];
        for &k in &self.k_draws {
            hist[k] += 1;
        }
        let best = hist.iter().copied().max()?;
        if best == 0 {
            return None;
        }
        hist.iter().position(|&c| c == best)
    }

    /// Applies a label permutation to every stored draw (`perm[old] = new`).
    /// Used to check that summaries do not depend on label names.
    pub fn relabel_draw(&mut self, draw: usize, perm: &[usize]) {
        assert_eq!(perm.len(), self.k_max);
        let z = &self.z_draws[draw];
        let labels = z.labels().iter().map(|&l| perm[l]).collect();
        self.z_draws[draw] =
            CommunityAssignment::new(labels, self.k_max).expect("permutation keeps labels in range");
        self.theta_draws[draw] = self.theta_draws[draw].relabeled(perm);
        let w = &self.weight_draws[draw];
        let mut permuted = vec![0.0; w.len()];
        for (old, &x) in w.iter().enumerate() {
            permuted[perm[old]] = x;
        }
        self.weight_draws[draw] = permuted;
        // sticks are order-dependent and have no meaning after relabeling
        if let Some(v) = self.stick_draws.get_mut(draw) {
            v.clear();
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            model: self.model,
            n: self.n,
            k_max: self.k_max,
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            draws: self.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for i in 0..self.len() {
            let rec = DrawRecord {
                iter: self.burn_in + i + 1,
                k: self.k_draws[i],
                loglik: self.loglik_draws[i],
                z: self.z_draws[i].labels().iter().map(|&l| l + 1).collect(),
                weights: self.weight_draws[i].clone(),
                sticks: self.stick_draws.get(i).cloned(),
                theta: ThetaRecord {
                    labels: self.theta_draws[i].labels.iter().map(|&l| l + 1).collect(),
                    mu: self.theta_draws[i].mu.clone(),
                    sigma2: self.theta_draws[i].sigma2.clone(),
                },
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("trace file is empty".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.format_version != TRACE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported trace format_version {}",
                header.format_version
            )));
        }
        let mut trace = ChainTrace {
            model: header.model,
            n: header.n,
            k_max: header.k_max,
            seed: header.seed,
            iterations: header.iterations,
            burn_in: header.burn_in,
            z_draws: Vec::with_capacity(header.draws),
            theta_draws: Vec::with_capacity(header.draws),
            weight_draws: Vec::with_capacity(header.draws),
            stick_draws: Vec::new(),
            loglik_draws: Vec::with_capacity(header.draws),
            k_draws: Vec::with_capacity(header.draws),
        };
        let from_one_based = |v: Vec<usize>| -> Result<Vec<usize>> {
            v.into_iter()
                .map(|l| {
                    l.checked_sub(1)
                        .ok_or_else(|| Error::InvalidInput("trace labels are 1-based".into()))
                })
                .collect()
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DrawRecord = serde_json::from_str(&line)?;
            let z = from_one_based(rec.z)?;
            if z.len() != header.n {
                return Err(Error::InvalidInput(format!(
                    "trace draw at iteration {} has {} labels, expected {}",
                    rec.iter,
                    z.len(),
                    header.n
                )));
            }
            trace.z_draws.push(CommunityAssignment::new(z, header.k_max)?);
            trace.theta_draws.push(ThetaDraw {
                labels: from_one_based(rec.theta.labels)?,
                mu: rec.theta.mu,
                sigma2: rec.theta.sigma2,
            });
            trace.weight_draws.push(rec.weights);
            if let Some(s) = rec.sticks {
                trace.stick_draws.push(s);
            }
            trace.loglik_draws.push(rec.loglik);
            trace.k_draws.push(rec.k);
        }
        if trace.len() != header.draws {
            return Err(Error::InvalidInput(format!(
                "trace header announces {} draws, found {}",
                header.draws,
                trace.len()
            )));
        }
        Ok(trace)
    }
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    format_version: u32,
    model: ModelKind,
    n: usize,
    k_max: usize,
    seed: u64,
    iterations: usize,
    burn_in: usize,
    draws: usize,
}

#[derive(Serialize, Deserialize)]
struct DrawRecord {
    iter: usize,
    k: usize,
    loglik: f64,
    z: Vec<usize>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sticks: Option<Vec<f64>>,
    theta: ThetaRecord,
}

#[derive(Serialize, Deserialize)]
struct ThetaRecord {
    labels: Vec<usize>,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}
