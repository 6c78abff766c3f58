//! Fully connected, undirected weighted network without self-loops.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64};

/// Symmetric `n x n` edge-weight matrix with a zero diagonal.
///
/// Rows are stored contiguously so samplers can borrow a node's incident
/// weights as a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    values: Array2<f64>,
    taxon_ids: Vec<String>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl WeightMatrix {
    /// Validates symmetry, a zero diagonal and finiteness. Entries that agree
    /// with their transpose within a relative `1e-12` are mirrored from the
    /// upper triangle so the stored matrix is exactly symmetric.
    pub fn new(values: Array2<f64>, taxon_ids: Vec<String>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::InvalidInput(format!(
                "weight matrix must be square, got {rows}x{cols}"
            )));
        }
        if taxon_ids.len() != rows {
            return Err(Error::InvalidInput(format!(
                "{} taxon ids for a {rows}x{rows} matrix",
                taxon_ids.len()
            )));
        }
        let mut values = values.as_standard_layout().into_owned();
        for j in 0..rows {
            if values[[j, j]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry {} is {}, self-loops are not allowed",
                    j + 1,
                    values[[j, j]]
                )));
            }
            for k in (j + 1)..rows {
                let a = values[[j, k]];
                let b = values[[k, j]];
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite weight between nodes {} and {}",
                        j + 1,
                        k + 1
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "asymmetric weights between nodes {} and {}: {a} vs {b}",
                        j + 1,
                        k + 1
                    )));
                }
                values[[k, j]] = a;
            }
        }
        Ok(WeightMatrix { values, taxon_ids })
    }

    /// Builds a matrix with generated node ids `node_1..node_n`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let ids = default_ids(values.nrows());
        Self::new(values, ids)
    }

    /// Builds from a flat list of upper-triangle weights in row order
    /// `(0,1), (0,2), .., (1,2), ..`.
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidInput(format!(
                "expected {} upper-triangle weights for n = {n}, got {}",
                n * n.saturating_sub(1) / 2,
                upper.len()
            )));
        }
        let mut values = Array2::zeros((n, n));
        let mut it = upper.iter();
        for j in 0..n {
            for k in (j + 1)..n {
                let w = *it.next().expect("length checked");
                values[[j, k]] = w;
                values[[k, j]] = w;
            }
        }
        Self::from_values(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[[j, k]]
    }

    /// Weights incident to node `j`, including the zero self entry.
    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        self.values
            .row(j)
            .to_slice()
            .expect("weight matrix is stored in standard layout")
    }

    /// Iterator over unordered edges `(j, k, w)` with `j < k`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |j| ((j + 1)..n).map(move |k| (j, k, self.values[[j, k]])))
    }

    /// Writes the matrix as CSV: a header of node ids followed by `n` rows of
    /// `n` weights.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.taxon_ids)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let ids: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidInput("weight matrix header is empty".into()));
        }
        let mut values = Array2::zeros((n, n));
        let mut rows = 0;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if i >= n {
                return Err(Error::InvalidInput(format!(
                    "weight matrix has more than {n} data rows"
                )));
            }
            if rec.len() != n {
                return Err(Error::InvalidInput(format!(
                    "weight matrix row {} has {} fields, expected {n}",
                    i + 1,
                    rec.len()
                )));
            }
            for (k, field) in rec.iter().enumerate() {
                values[[i, k]] = parse_f64(field, i + 1, k + 1)?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::InvalidInput(format!(
                "weight matrix has {rows} data rows, expected {n}"
            )));
        }
        Self::new(values, ids)
    }
}

pub(crate) fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("node_{i}")).collect()
}

/// Nodal strength `d_j = sum_k |W_jk|`.
pub fn nodal_strength(w: &WeightMatrix) -> Vec<f64> {
    (0..w.n())
        .map(|j| w.row(j).iter().map(|x| x.abs()).sum())
        .collect()
}

/// Sums nodal strengths within groups (e.g. genus). `groups[j]` names the
/// group of node `j`; output is sorted by descending strength, ties by name.
pub fn grouped_strength(strength: &[f64], groups: &[String]) -> Result<Vec<(String, f64)>> {
    if strength.len() != groups.len() {
        return Err(Error::InvalidInput(format!(
            "{} strengths but {} group names",
            strength.len(),
            groups.len()
        )));
    }
    let mut totals: std::collections::BTreeMap<&str, f64> = Default::default();
    for (s, g) in strength.iter().zip(groups) {
        *totals.entry(g.as_str()).or_insert(0.0) += s;
    }
    let mut out: Vec<(String, f64)> = totals.into_iter().map(|(g, s)| (g.to_string(), s)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_asymmetric_and_self_loops() {
        let asym = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(WeightMatrix::from_values(asym).is_err());
        let diag = array![[1.0, 1.0], [1.0, 0.0]];
        assert!(WeightMatrix::from_values(diag).is_err());
        let nan = array![[0.0, f64::NAN], [f64::NAN, 0.0]];
        assert!(WeightMatrix::from_values(nan).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let w = WeightMatrix::from_upper_triangle(3, &[0.1, -1.0 / 3.0, 1e-300]).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = WeightMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn strength_examples() {
        let zero = WeightMatrix::from_values(Array2::zeros((4, 4))).unwrap();
        assert_eq!(nodal_strength(&zero), vec![0.0; 4]);

        let w = WeightMatrix::from_upper_triangle(3, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(nodal_strength(&w), vec![3.0, 4.0, 5.0]);

        let flipped = WeightMatrix::from_upper_triangle(3, &[-1.0, 2.0, -3.0]).unwrap();
        assert_eq!(nodal_strength(&w), nodal_strength(&flipped));
    }

    #[test]
    fn grouped_strength_ranks_groups() {
        let g = ["a", "b", "a"].map(String::from).to_vec();
        let out = grouped_strength(&[1.0, 5.0, 3.0], &g).unwrap();
        assert_eq!(out, vec![("b".to_string(), 5.0), ("a".to_string(), 4.0)]);
    }
}
