//! Shared CSV helpers.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::CommunityAssignment;

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.16e}", x)
}

pub(crate) fn parse_f64(field: &str, row: usize, col: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::InvalidInput(format!(
            "row {row}, column {col}: cannot parse `{field}` as a number"
        ))
    })
}

/// Writes a label vector as `node,label` CSV with 1-based labels.
pub fn write_labels_csv<W: Write>(
    writer: W,
    node_ids: &[String],
    z: &CommunityAssignment,
) -> Result<()> {
    if node_ids.len() != z.n() {
        return Err(Error::InvalidInput(format!(
            "{} node ids for {} labels",
            node_ids.len(),
            z.n()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "label"])?;
    for (id, &label) in node_ids.iter().zip(z.labels()) {
        w.write_record([id.as_str(), &(label + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `node,label` CSV with 1-based labels.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<(Vec<String>, CommunityAssignment)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "labels row {}: expected 2 fields, found {}",
                i + 1,
                rec.len()
            )));
        }
        let label: usize = rec[1].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("labels row {}: bad label `{}`", i + 1, &rec[1]))
        })?;
        if label == 0 {
            return Err(Error::InvalidInput(format!(
                "labels row {}: labels are 1-based",
                i + 1
            )));
        }
        ids.push(rec[0].to_string());
        raw.push(label - 1);
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("label file has no rows".into()));
    }
    let k_max = raw.iter().max().copied().unwrap_or(0) + 1;
    let z = CommunityAssignment::new(raw, k_max)?;
    Ok((ids, z))
}
