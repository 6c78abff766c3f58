//! Posterior summaries over stored label draws: MAP and PPM point
//! estimates, multi-chain consensus, block-mean credible intervals and
//! canonical relabeling.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{normal_logpdf, BlockStats, CommunityAssignment};
use crate::trace::ChainTrace;
use crate::weights::{nodal_strength, WeightMatrix};

/// Co-clustering frequencies over `B` draws, kept as exact integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosteriorPairwiseMatrix {
    n: usize,
    together: Vec<u64>,
    draws: u64,
}

#[inline]
fn pair_index(n: usize, j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

impl PosteriorPairwiseMatrix {
    pub fn new(n: usize) -> Self {
        PosteriorPairwiseMatrix {
            n,
            together: vec![0; n * n.saturating_sub(1) / 2],
            draws: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draws_used(&self) -> u64 {
        self.draws
    }

    pub fn add_draw(&mut self, z: &CommunityAssignment) {
        assert_eq!(z.n(), self.n, "draw has the wrong number of nodes");
        let labels = z.labels();
        let mut idx = 0;
        for j in 0..self.n {
            let lj = labels[j];
            for &lk in &labels[j + 1..] {
                self.together[idx] += u64::from(lj == lk);
                idx += 1;
            }
        }
        self.draws += 1;
    }

    /// Adds the draws of `other`; equal to accumulating the concatenated
    /// draw sequences.
    pub fn merge(&mut self, other: &PosteriorPairwiseMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::InvalidInput(format!(
                "cannot merge co-clustering matrices over {} and {} nodes",
                self.n, other.n
            )));
        }
        for (a, b) in self.together.iter_mut().zip(&other.together) {
            *a += b;
        }
        self.draws += other.draws;
        Ok(())
    }

    /// Number of draws in which `j` and `k` share a label.
    pub fn count(&self, j: usize, k: usize) -> u64 {
        if j == k {
            self.draws
        } else {
            self.together[pair_index(self.n, j, k)]
        }
    }

    pub fn prob(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 1.0;
        }
        self.count(j, k) as f64 / self.draws as f64
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(j, k)| self.prob(j, k))
    }

    /// CSV with a header of node ids followed by `n` rows of probabilities.
    pub fn write_csv<W: Write>(&self, writer: W, node_ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(node_ids)?;
        for j in 0..self.n {
            w.write_record((0..self.n).map(|k| fmt_f64(self.prob(j, k))))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// PPM of a sequence of draws. Accumulation is split across threads and the
/// integer counts merged, so the result does not depend on scheduling.
pub fn accumulate_ppm<'a, I>(n: usize, draws: I) -> PosteriorPairwiseMatrix
where
    I: IntoIterator<Item = &'a CommunityAssignment>,
{
    let draws: Vec<&CommunityAssignment> = draws.into_iter().collect();
    draws
        .par_chunks(64)
        .map(|chunk| {
            let mut m = PosteriorPairwiseMatrix::new(n);
            chunk.iter().for_each(|z| m.add_draw(z));
            m
        })
        .reduce(
            || PosteriorPairwiseMatrix::new(n),
            |mut a, b| {
                a.merge(&b).expect("same node count");
                a
            },
        )
}

pub fn trace_ppm(trace: &ChainTrace) -> PosteriorPairwiseMatrix {
    accumulate_ppm(trace.n, &trace.z_draws)
}

/// Location of a stored draw within one or more chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DrawIndex {
    pub chain: usize,
    pub draw: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub index: DrawIndex,
    pub z: CommunityAssignment,
    /// Squared co-clustering loss for z-PPM, log joint density for MAP.
    pub score: f64,
}

/// `sum_{j<k} (I(z_j = z_k) - M_jk)^2`.
pub fn ppm_loss(z: &CommunityAssignment, ppm: &PosteriorPairwiseMatrix) -> f64 {
    scaled_loss(z, ppm) as f64 / (ppm.draws as f64 * ppm.draws as f64)
}

/// The loss times `draws^2`, in exact integer arithmetic so that equal
/// losses compare equal.
fn scaled_loss(z: &CommunityAssignment, ppm: &PosteriorPairwiseMatrix) -> u128 {
    let labels = z.labels();
    let t = i128::from(ppm.draws);
    let mut idx = 0;
    let mut loss = 0u128;
    for (j, &lj) in labels.iter().enumerate() {
        for &lk in &labels[j + 1..] {
            let d = if lj == lk { t } else { 0 } - i128::from(ppm.together[idx]);
            loss += (d * d) as u128;
            idx += 1;
        }
    }
    loss
}

fn argmin_over<'a>(
    candidates: Vec<(DrawIndex, &'a CommunityAssignment)>,
    ppm: &PosteriorPairwiseMatrix,
) -> Result<PointEstimate> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no stored draws to search".into()));
    }
    if ppm.draws == 0 {
        return Err(Error::InvalidInput("co-clustering matrix has no draws".into()));
    }
    if let Some((_, z)) = candidates.iter().find(|(_, z)| z.n() != ppm.n()) {
        return Err(Error::InvalidInput(format!(
            "draw over {} nodes does not match a co-clustering matrix over {}",
            z.n(),
            ppm.n()
        )));
    }
    let losses: Vec<u128> = candidates
        .par_iter()
        .map(|(_, z)| scaled_loss(z, ppm))
        .collect();
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
    }
    Ok(PointEstimate {
        index: candidates[best].0,
        z: candidates[best].1.clone(),
        score: losses[best] as f64 / (ppm.draws as f64 * ppm.draws as f64),
    })
}

/// Stored draw minimizing the squared deviation of its co-clustering matrix
/// from `ppm`; earliest draw wins ties.
pub fn estimate_z_ppm(trace: &ChainTrace, ppm: &PosteriorPairwiseMatrix) -> Result<PointEstimate> {
    let candidates = trace
        .z_draws
        .iter()
        .enumerate()
        .map(|(draw, z)| (DrawIndex { chain: 0, draw }, z))
        .collect();
    argmin_over(candidates, ppm)
}

/// Log joint `log f(W | z, theta) + log pi(z | weights)` of one stored draw.
pub fn draw_log_joint(trace: &ChainTrace, draw: usize, w: &WeightMatrix) -> f64 {
    let z = &trace.z_draws[draw];
    let theta = &trace.theta_draws[draw];
    let stats = BlockStats::compute(w, z);
    let mut total = 0.0;
    for &l in theta.labels() {
        for &q in theta.labels().iter().filter(|&&q| q >= l) {
            let n = stats.n_edges(l, q);
            if n == 0 {
                continue;
            }
            let (mu, s2) = theta.get(l, q).expect("occupied labels are stored");
            let n = n as f64;
            let d = stats.mean(l, q) - mu;
            total += n * normal_logpdf(0.0, 0.0, s2) - (stats.sum_sq_dev(l, q) + n * d * d) / (2.0 * s2);
        }
    }
    let weights = &trace.weight_draws[draw];
    for (l, &c) in z.counts().iter().enumerate() {
        if c > 0 {
            total += c as f64 * weights[l].ln();
        }
    }
    total
}

/// Stored draw with the largest log joint density; earliest draw wins ties.
pub fn estimate_map(trace: &ChainTrace, w: &WeightMatrix) -> Result<PointEstimate> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace has no stored draws".into()));
    }
    if trace.n != w.n() {
        return Err(Error::InvalidInput(format!(
            "trace over {} nodes, network has {}",
            trace.n,
            w.n()
        )));
    }
    let scores: Vec<f64> = (0..trace.len())
        .into_par_iter()
        .map(|i| draw_log_joint(trace, i, w))
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        // NaN never wins
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    Ok(PointEstimate {
        index: DrawIndex { chain: 0, draw: best },
        z: trace.z_draws[best].clone(),
        score: scores[best],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub ppm: PosteriorPairwiseMatrix,
    pub estimate: PointEstimate,
}

/// Pools several chains: the merged PPM weights every chain by its number
/// of draws, and the point estimate searches the union of stored draws in
/// chain order.
pub fn consensus_ppm(traces: &[ChainTrace]) -> Result<Consensus> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidInput("no chains to combine".into()))?;
    if let Some(t) = traces.iter().find(|t| t.n != first.n) {
        return Err(Error::InvalidInput(format!(
            "chains cover different node sets ({} vs {} nodes)",
            first.n, t.n
        )));
    }
    let per_chain: Vec<PosteriorPairwiseMatrix> = traces.par_iter().map(trace_ppm).collect();
    let mut ppm = PosteriorPairwiseMatrix::new(first.n);
    for m in &per_chain {
        ppm.merge(m)?;
    }
    let candidates = traces
        .iter()
        .enumerate()
        .flat_map(|(chain, t)| {
            t.z_draws
                .iter()
                .enumerate()
                .map(move |(draw, z)| (DrawIndex { chain, draw }, z))
        })
        .collect();
    let estimate = argmin_over(candidates, &ppm)?;
    Ok(Consensus { ppm, estimate })
}

/// Renumbers communities `0..K` by descending size; equal sizes are ordered
/// by their smallest node index.
pub fn canonical_relabel(z: &CommunityAssignment) -> CommunityAssignment {
    let k_max = z.k_max();
    let mut first_node = vec![usize::MAX; k_max];
    for (j, &l) in z.labels().iter().enumerate() {
        if first_node[l] == usize::MAX {
            first_node[l] = j;
        }
    }
    let mut order = z.occupied_labels();
    order.sort_by(|&a, &b| {
        z.counts()[b]
            .cmp(&z.counts()[a])
            .then(first_node[a].cmp(&first_node[b]))
    });
    let mut map = vec![usize::MAX; k_max];
    for (new, &old) in order.iter().enumerate() {
        map[old] = new;
    }
    let labels = z.labels().iter().map(|&l| map[l]).collect();
    CommunityAssignment::new(labels, order.len().max(1)).expect("relabeling stays in range")
}

/// Posterior summary of one block under the point estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimate {
    /// 1-based community labels of the block, `l <= q`.
    pub l: usize,
    pub q: usize,
    pub n_edges: u64,
    /// Mean observed weight in the block under the point estimate.
    pub observed_mean: Option<f64>,
    /// Number of draws contributing a sample of the block mean.
    pub draws: usize,
    pub mean: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// The same summaries after mapping each sample through `tanh`
    /// (inverse Fisher), i.e. on the correlation scale.
    pub corr_mean: Option<f64>,
    pub corr_lower: Option<f64>,
    pub corr_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunitySummary {
    pub k_hat: usize,
    /// 1-based labels of the canonical point estimate.
    pub labels: Vec<usize>,
    pub node_ids: Vec<String>,
    pub community_sizes: Vec<usize>,
    pub blocks: Vec<BlockEstimate>,
    pub per_node_confidence: Vec<f64>,
    pub nodal_strength: Vec<f64>,
    pub credible_level: f64,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(mut samples: Vec<f64>) -> (Option<f64>, Option<f64>, Option<f64>) {
    if samples.is_empty() {
        return (None, None, None);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    (
        Some(mean),
        Some(quantile_sorted(&samples, 0.025)),
        Some(quantile_sorted(&samples, 0.975)),
    )
}

/// Label of the majority of `members` in `z`; ties go to the smaller label.
fn majority_label(z: &CommunityAssignment, members: &[usize], scratch: &mut [usize]) -> usize {
    scratch.iter_mut().for_each(|c| *c = 0);
    for &j in members {
        scratch[z.label(j)] += 1;
    }
    let mut best = 0;
    for (l, &c) in scratch.iter().enumerate() {
        if c > scratch[best] {
            best = l;
        }
    }
    best
}

/// Block-mean posterior summaries under `z_hat`, pooled over `traces`.
///
/// Each estimated community is matched, draw by draw, to the label held by
/// most of its members. A between-community block is sampled only when its
/// two communities map to distinct labels in that draw, and a
/// within-community block only when its matched label holds at least two
/// nodes. Blocks with no eligible draw report `None`.
pub fn summarize_blocks(
    traces: &[ChainTrace],
    z_hat: &CommunityAssignment,
    ppm: &PosteriorPairwiseMatrix,
    w: &WeightMatrix,
) -> Result<CommunitySummary> {
    let n = w.n();
    if z_hat.n() != n || ppm.n() != n || traces.iter().any(|t| t.n != n) {
        return Err(Error::InvalidInput(
            "point estimate, co-clustering matrix, traces and network must share one node set"
                .into(),
        ));
    }
    let z_hat = canonical_relabel(z_hat);
    let k_hat = z_hat.num_occupied();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k_hat];
    for (j, &l) in z_hat.labels().iter().enumerate() {
        members[l].push(j);
    }

    let n_pairs = k_hat * (k_hat + 1) / 2;
    let pair_slot = |a: usize, b: usize| pair_index(k_hat + 1, a, b + 1);
    let per_trace: Vec<Vec<Vec<f64>>> = traces
        .par_iter()
        .map(|trace| {
            let mut samples = vec![Vec::new(); n_pairs];
            let mut scratch = vec![0usize; trace.k_max];
            let mut mapped = vec![0usize; k_hat];
            for (z, theta) in trace.z_draws.iter().zip(&trace.theta_draws) {
                for (a, m) in members.iter().enumerate() {
                    mapped[a] = majority_label(z, m, &mut scratch);
                }
                for a in 0..k_hat {
                    for b in a..k_hat {
                        let (la, lb) = (mapped[a], mapped[b]);
                        let eligible = if a == b {
                            z.counts()[la] >= 2
                        } else {
                            la != lb
                        };
                        if !eligible {
                            continue;
                        }
                        if let Some((mu, _)) = theta.get(la, lb) {
                            samples[pair_slot(a, b)].push(mu);
                        }
                    }
                }
            }
            samples
        })
        .collect();

    let stats = BlockStats::compute(w, &z_hat);
    let mut blocks = Vec::with_capacity(n_pairs);
    for a in 0..k_hat {
        for b in a..k_hat {
            let slot = pair_slot(a, b);
            let samples: Vec<f64> = per_trace.iter().flat_map(|s| s[slot].iter().copied()).collect();
            let draws = samples.len();
            let corr: Vec<f64> = samples.iter().map(|x| x.tanh()).collect();
            let (mean, lower, upper) = interval(samples);
            let (corr_mean, corr_lower, corr_upper) = interval(corr);
            let n_edges = stats.n_edges(a, b);
            blocks.push(BlockEstimate {
                l: a + 1,
                q: b + 1,
                n_edges,
                observed_mean: (n_edges > 0).then(|| stats.mean(a, b)),
                draws,
                mean,
                lower,
                upper,
                corr_mean,
                corr_lower,
                corr_upper,
            });
        }
    }

    let per_node_confidence = (0..n)
        .map(|j| {
            let m = &members[z_hat.label(j)];
            if m.len() < 2 {
                return 1.0;
            }
            m.iter().filter(|&&k| k != j).map(|&k| ppm.prob(j, k)).sum::<f64>()
                / (m.len() - 1) as f64
        })
        .collect();

    Ok(CommunitySummary {
        k_hat,
        labels: z_hat.labels().iter().map(|&l| l + 1).collect(),
        node_ids: w.taxon_ids().to_vec(),
        community_sizes: z_hat.counts().to_vec(),
        blocks,
        per_node_confidence,
        nodal_strength: nodal_strength(w),
        credible_level: 0.95,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca(labels: &[usize]) -> CommunityAssignment {
        let k = labels.iter().max().unwrap() + 1;
        CommunityAssignment::new(labels.to_vec(), k).unwrap()
    }

    #[test]
    fn pair_index_is_dense() {
        let n = 6;
        let mut seen = vec![false; n * (n - 1) / 2];
        for j in 0..n {
            for k in (j + 1)..n {
                let i = pair_index(n, j, k);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(i, pair_index(n, k, j));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn ppm_of_identical_draws_is_binary() {
        let z = ca(&[0, 0, 1, 2, 1]);
        let m = accumulate_ppm(5, vec![&z, &z, &z]);
        for j in 0..5 {
            for k in 0..5 {
                let expected = if z.together(j, k) { 1.0 } else { 0.0 };
                assert_eq!(m.prob(j, k), expected);
            }
        }
    }

    #[test]
    fn ppm_of_alternating_partitions() {
        // the two partitions agree only on pair (1, 2)
        let a = ca(&[0, 0, 0, 1]);
        let b = ca(&[0, 0, 1, 1]);
        let m = accumulate_ppm(4, vec![&a, &b]);
        assert_eq!(m.prob(0, 1), 1.0);
        assert_eq!(m.prob(0, 2), 0.5);
        assert_eq!(m.prob(2, 3), 0.5);
        assert_eq!(m.prob(1, 3), 0.0);
    }

    #[test]
    fn weighted_merge() {
        let a = ca(&[0, 0, 1]);
        let b = ca(&[0, 1, 1]);
        let m1 = accumulate_ppm(3, std::iter::repeat_n(&a, 10));
        let m2 = accumulate_ppm(3, std::iter::repeat_n(&b, 30));
        let mut merged = m1.clone();
        merged.merge(&m2).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let expected = (10.0 * m1.prob(j, k) + 30.0 * m2.prob(j, k)) / 40.0;
                assert!((merged.prob(j, k) - expected).abs() < 1e-15);
            }
        }
        assert!(merged.merge(&PosteriorPairwiseMatrix::new(4)).is_err());
    }

    #[test]
    fn canonical_relabel_examples() {
        let z = CommunityAssignment::new(vec![4, 4, 1], 6).unwrap();
        assert_eq!(canonical_relabel(&z).labels(), &[0, 0, 1]);

        let ab = CommunityAssignment::new(vec![0, 1], 2).unwrap();
        let ba = CommunityAssignment::new(vec![1, 0], 2).unwrap();
        assert_eq!(canonical_relabel(&ab).labels(), &[0, 1]);
        assert_eq!(canonical_relabel(&ba).labels(), &[0, 1]);

        let z = CommunityAssignment::new(vec![3, 1, 1, 3, 0, 3], 4).unwrap();
        let once = canonical_relabel(&z);
        assert_eq!(canonical_relabel(&once), once);
        assert!(once.same_partition(&z));
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
        assert!((quantile_sorted(&xs, 0.025) - 1.1).abs() < 1e-12);
    }
}
