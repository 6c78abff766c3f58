//! From a sample-by-taxon abundance table to a Fisher-transformed weight
//! matrix: prevalence filter, modified centered log-ratio (MCLR), rank
//! correlation, Fisher transform.

use std::io::Read;

use log::warn;
use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::parse_f64;
use crate::weights::WeightMatrix;

const SIMPLEX_TOL: f64 = 1e-9;

/// Non-negative `m x n` abundances (samples by taxa), each row on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeAbundanceMatrix {
    values: Array2<f64>,
    sample_ids: Vec<String>,
    taxon_ids: Vec<String>,
    raw_counts: bool,
}

impl RelativeAbundanceMatrix {
    /// Validates relative abundances: non-negative and every row summing to 1.
    pub fn new(values: Array2<f64>, sample_ids: Vec<String>, taxon_ids: Vec<String>) -> Result<Self> {
        check_shape(&values, &sample_ids, &taxon_ids)?;
        check_non_negative(&values)?;
        for (i, row) in values.rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidInput(format!(
                    "sample `{}` sums to {s}, not 1; use `from_counts` for raw counts",
                    sample_ids[i]
                )));
            }
        }
        Ok(RelativeAbundanceMatrix {
            values,
            sample_ids,
            taxon_ids,
            raw_counts: false,
        })
    }

    /// Accepts raw counts (or any non-negative table) and normalizes each row.
    pub fn from_counts(values: Array2<f64>, sample_ids: Vec<String>, taxon_ids: Vec<String>) -> Result<Self> {
        check_shape(&values, &sample_ids, &taxon_ids)?;
        check_non_negative(&values)?;
        let mut values = values;
        for (i, mut row) in values.rows_mut().into_iter().enumerate() {
            let s = row.sum();
            if s <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sample `{}` has no non-zero abundance",
                    sample_ids[i]
                )));
            }
            row.mapv_inplace(|x| x / s);
        }
        Ok(RelativeAbundanceMatrix {
            values,
            sample_ids,
            taxon_ids,
            raw_counts: true,
        })
    }

    /// Reads a CSV whose first row holds taxon ids (after a leading cell for
    /// the sample-id column) and whose first column holds sample ids. Rows
    /// not already on the simplex are treated as counts and normalized.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::InvalidInput(
                "abundance header needs a sample-id column and at least one taxon".into(),
            ));
        }
        let taxon_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let n = taxon_ids.len();
        let mut sample_ids = Vec::new();
        let mut flat = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(Error::InvalidInput(format!(
                    "abundance row {} has {} fields, expected {}",
                    i + 1,
                    rec.len(),
                    n + 1
                )));
            }
            sample_ids.push(rec[0].trim().to_string());
            for (k, field) in rec.iter().skip(1).enumerate() {
                flat.push(parse_f64(field, i + 1, k + 2)?);
            }
        }
        if sample_ids.is_empty() {
            return Err(Error::InvalidInput("abundance table has no samples".into()));
        }
        let values = Array2::from_shape_vec((sample_ids.len(), n), flat)
            .expect("row lengths checked");
        let on_simplex = values
            .rows()
            .into_iter()
            .all(|row| (row.sum() - 1.0).abs() <= SIMPLEX_TOL);
        if on_simplex {
            Self::new(values, sample_ids, taxon_ids)
        } else {
            Self::from_counts(values, sample_ids, taxon_ids)
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    /// Whether the input was row-normalized from counts.
    pub fn raw_counts(&self) -> bool {
        self.raw_counts
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_taxa(&self) -> usize {
        self.values.ncols()
    }
}

fn check_shape(values: &Array2<f64>, samples: &[String], taxa: &[String]) -> Result<()> {
    if values.nrows() != samples.len() || values.ncols() != taxa.len() {
        return Err(Error::InvalidInput(format!(
            "{}x{} abundance table with {} sample ids and {} taxon ids",
            values.nrows(),
            values.ncols(),
            samples.len(),
            taxa.len()
        )));
    }
    if taxa.is_empty() {
        return Err(Error::InvalidInput("abundance table has no taxa".into()));
    }
    Ok(())
}

fn check_non_negative(values: &Array2<f64>) -> Result<()> {
    if let Some(((i, j), x)) = values.indexed_iter().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "abundance at sample {}, taxon {} is {x}; entries must be finite and non-negative",
            i + 1,
            j + 1
        )));
    }
    Ok(())
}

/// Result of prevalence filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub abundance: RelativeAbundanceMatrix,
    pub dropped_taxa: Vec<String>,
    /// Samples left with no non-zero abundance after filtering; they cannot
    /// be renormalized and are removed.
    pub dropped_samples: Vec<String>,
}

/// Keeps taxa with at least `min_nonzero` non-zero samples, in original
/// order, and renormalizes rows.
pub fn filter_prevalence(abundance: &RelativeAbundanceMatrix, min_nonzero: usize) -> Result<Filtered> {
    if min_nonzero == 0 {
        return Err(Error::InvalidParameter("min_nonzero must be at least 1".into()));
    }
    let values = abundance.values();
    let (keep, dropped): (Vec<usize>, Vec<usize>) = (0..abundance.n_taxa())
        .partition(|&j| values.column(j).iter().filter(|&&x| x > 0.0).count() >= min_nonzero);
    if keep.is_empty() {
        return Err(Error::EmptyNetwork(format!(
            "no taxon has {min_nonzero} or more non-zero samples"
        )));
    }
    let kept = values.select(Axis(1), &keep);
    let live_rows: Vec<usize> = (0..kept.nrows()).filter(|&i| kept.row(i).sum() > 0.0).collect();
    if live_rows.is_empty() {
        return Err(Error::EmptyNetwork("every sample is empty after filtering".into()));
    }
    let dropped_samples = (0..kept.nrows())
        .filter(|i| !live_rows.contains(i))
        .map(|i| abundance.sample_ids()[i].clone())
        .collect();
    let mut kept = kept.select(Axis(0), &live_rows);
    for mut row in kept.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    Ok(Filtered {
        abundance: RelativeAbundanceMatrix {
            values: kept,
            sample_ids: live_rows.iter().map(|&i| abundance.sample_ids()[i].clone()).collect(),
            taxon_ids: keep.iter().map(|&j| abundance.taxon_ids()[j].clone()).collect(),
            raw_counts: abundance.raw_counts(),
        },
        dropped_taxa: dropped.iter().map(|&j| abundance.taxon_ids()[j].clone()).collect(),
        dropped_samples,
    })
}

/// MCLR output: zeros stay exactly zero, non-zeros are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedAbundanceMatrix {
    pub values: Array2<f64>,
    pub zero_mask: Array2<bool>,
    /// Shift added to every non-zero log-ratio.
    pub epsilon: f64,
}

/// Modified centered log-ratio transform.
///
/// For each sample the log-ratios `log(y_ij / g_i)` use the geometric mean
/// `g_i` of that sample's non-zero entries. One shift
/// `eps = |min log-ratio over the whole matrix| + 1` is added to every
/// non-zero log-ratio; zeros are left at zero.
pub fn mclr_transform(abundance: &RelativeAbundanceMatrix) -> Result<TransformedAbundanceMatrix> {
    let y = abundance.values();
    let (m, n) = y.dim();
    let mut values = Array2::zeros((m, n));
    let zero_mask = y.mapv(|x| x == 0.0);
    let mut min_lr = f64::INFINITY;
    for i in 0..m {
        let row = y.row(i);
        let nz = row.iter().filter(|&&x| x > 0.0).count();
        if nz == 0 {
            return Err(Error::InvalidInput(format!(
                "sample `{}` has no non-zero abundance; geometric mean undefined",
                abundance.sample_ids()[i]
            )));
        }
        let log_g = row.iter().filter(|&&x| x > 0.0).map(|x| x.ln()).sum::<f64>() / nz as f64;
        for j in 0..n {
            if row[j] > 0.0 {
                let lr = row[j].ln() - log_g;
                values[[i, j]] = lr;
                min_lr = min_lr.min(lr);
            }
        }
    }
    let epsilon = min_lr.abs() + 1.0;
    for (x, &zero) in values.iter_mut().zip(zero_mask.iter()) {
        if !zero {
            *x += epsilon;
        }
    }
    Ok(TransformedAbundanceMatrix {
        values,
        zero_mask,
        epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    #[default]
    Kendall,
    Spearman,
    Pearson,
}

impl std::str::FromStr for CorrelationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kendall" => Ok(CorrelationMethod::Kendall),
            "spearman" => Ok(CorrelationMethod::Spearman),
            "pearson" => Ok(CorrelationMethod::Pearson),
            other => Err(Error::InvalidParameter(format!(
                "unknown correlation method `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Kendall => "kendall",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Pearson => "pearson",
        })
    }
}

/// Symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: Array2<f64>,
    pub method: CorrelationMethod,
    /// Columns with zero variance; their correlations were set to 0.
    pub zero_variance: Vec<usize>,
}

/// Kendall tau-b with tie correction, by direct enumeration of sample pairs.
pub fn kendall_tau_b(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let m = x.len();
    let mut s: i64 = 0;
    let mut untied_x: i64 = 0;
    let mut untied_y: i64 = 0;
    for i in 0..m {
        for k in (i + 1)..m {
            let dx = sign(x[i] - x[k]);
            let dy = sign(y[i] - y[k]);
            s += dx * dy;
            untied_x += dx.abs();
            untied_y += dy.abs();
        }
    }
    if untied_x == 0 || untied_y == 0 {
        return None;
    }
    Some(s as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt())
}

fn sign(d: f64) -> i64 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// Pearson correlation; `None` when either input is constant.
pub fn pearson(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let m = x.len() as f64;
    let mx = x.sum() / m;
    let my = y.sum() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(x: ArrayView1<f64>) -> Vec<f64> {
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; m];
    let mut i = 0;
    while i < m {
        let mut k = i;
        while k + 1 < m && x[order[k + 1]] == x[order[i]] {
            k += 1;
        }
        let avg = (i + k) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=k] {
            ranks[idx] = avg;
        }
        i = k + 1;
    }
    ranks
}

/// Pairwise correlation of the transformed columns.
pub fn rank_correlation(
    transformed: &TransformedAbundanceMatrix,
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    let data = &transformed.values;
    let (m, n) = data.dim();
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "correlation needs at least 3 samples, got {m}"
        )));
    }
    let columns: Array2<f64> = match method {
        CorrelationMethod::Spearman => {
            let mut ranked = Array2::zeros((m, n));
            for j in 0..n {
                let r = average_ranks(data.column(j));
                ranked.column_mut(j).assign(&ndarray::Array1::from(r));
            }
            ranked
        }
        _ => data.clone(),
    };
    let constant: Vec<bool> = (0..n)
        .map(|j| {
            let c = columns.column(j);
            c.iter().all(|&x| x == c[0])
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            ((j + 1)..n)
                .map(|k| {
                    if constant[j] || constant[k] {
                        return 0.0;
                    }
                    let (a, b) = (columns.column(j), columns.column(k));
                    let r = match method {
                        CorrelationMethod::Kendall => kendall_tau_b(a, b),
                        _ => pearson(a, b),
                    };
                    r.unwrap_or(0.0).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();

    let mut values = Array2::eye(n);
    for (j, row) in rows.iter().enumerate() {
        for (off, &r) in row.iter().enumerate() {
            let k = j + 1 + off;
            values[[j, k]] = r;
            values[[k, j]] = r;
        }
    }
    let zero_variance: Vec<usize> = (0..n).filter(|&j| constant[j]).collect();
    if !zero_variance.is_empty() {
        warn!(
            "{} taxon column(s) have zero variance; their correlations are set to 0",
            zero_variance.len()
        );
    }
    Ok(CorrelationMatrix {
        values,
        method,
        zero_variance,
    })
}

pub const DEFAULT_CLAMP: f64 = 0.999;

/// `F(r) = 0.5 * ln((1 + r) / (1 - r))`.
#[inline]
pub fn fisher(r: f64) -> f64 {
    0.5 * ((1.0 + r) / (1.0 - r)).ln()
}

#[inline]
pub fn inverse_fisher(w: f64) -> f64 {
    w.tanh()
}

/// Fisher-transforms off-diagonal correlations after clamping them to
/// `[-clamp, clamp]`; the diagonal is set to 0.
pub fn fisher_transform(corr: &CorrelationMatrix, clamp: f64, taxon_ids: Vec<String>) -> Result<WeightMatrix> {
    if !(clamp > 0.0 && clamp < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "clamp must lie in (0, 1), got {clamp}"
        )));
    }
    let n = corr.values.nrows();
    let values = Array2::from_shape_fn((n, n), |(j, k)| {
        if j == k {
            0.0
        } else {
            fisher(corr.values[[j, k]].clamp(-clamp, clamp))
        }
    });
    WeightMatrix::new(values, taxon_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_nonzero: usize,
    pub method: CorrelationMethod,
    pub clamp: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_nonzero: 7,
            method: CorrelationMethod::Kendall,
            clamp: DEFAULT_CLAMP,
        }
    }
}

/// What each pipeline stage did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub input_samples: usize,
    pub input_taxa: usize,
    pub raw_counts_normalized: bool,
    pub config: PreprocessConfig,
    pub stages: Vec<String>,
    pub dropped_taxa: Vec<String>,
    pub dropped_samples: Vec<String>,
    pub mclr_epsilon: f64,
    pub zero_variance_taxa: Vec<String>,
    pub output_samples: usize,
    pub output_taxa: usize,
}

/// Filter, MCLR, correlation and Fisher transform in sequence.
pub fn build_weight_matrix(
    abundance: &RelativeAbundanceMatrix,
    config: &PreprocessConfig,
) -> Result<(WeightMatrix, Provenance)> {
    let filtered = filter_prevalence(abundance, config.min_nonzero).map_err(|e| e.in_stage("filter_prevalence"))?;
    let kept = &filtered.abundance;
    if kept.n_taxa() < 2 {
        return Err(Error::EmptyNetwork(format!(
            "{} taxon left after filtering; at least 2 are needed",
            kept.n_taxa()
        ))
        .in_stage("filter_prevalence"));
    }
    let transformed = mclr_transform(kept).map_err(|e| e.in_stage("mclr_transform"))?;
    let corr = rank_correlation(&transformed, config.method).map_err(|e| e.in_stage("rank_correlation"))?;
    let w = fisher_transform(&corr, config.clamp, kept.taxon_ids().to_vec())
        .map_err(|e| e.in_stage("fisher_transform"))?;
    let provenance = Provenance {
        input_samples: abundance.n_samples(),
        input_taxa: abundance.n_taxa(),
        raw_counts_normalized: abundance.raw_counts(),
        config: *config,
        stages: ["filter_prevalence", "mclr_transform", "rank_correlation", "fisher_transform"]
            .map(String::from)
            .to_vec(),
        dropped_taxa: filtered.dropped_taxa.clone(),
        dropped_samples: filtered.dropped_samples.clone(),
        mclr_epsilon: transformed.epsilon,
        zero_variance_taxa: corr
            .zero_variance
            .iter()
            .map(|&j| kept.taxon_ids()[j].clone())
            .collect(),
        output_samples: kept.n_samples(),
        output_taxa: kept.n_taxa(),
    };
    Ok((w, provenance))
}
