//! CSV and JSON emission.
//!
//! Per-iteration CSV columns, in order:
//! `k, loss, hardprune_acc, violation, s_prime, s, alpha, soc_w, soc_z, wall_ms`.
//! `hardprune_acc` is empty on iterations that are not evaluation points;
//! flags are `1`/`0`; floats use the shortest representation that reads
//! back to the same value.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slrprune_core::prune::CompressionReport;
use slrprune_core::slr::RunRecord;

use crate::error::{HarnessError, Result};

pub const RECORD_COLUMNS: [&str; 10] = [
    "k",
    "loss",
    "hardprune_acc",
    "violation",
    "s_prime",
    "s",
    "alpha",
    "soc_w",
    "soc_z",
    "wall_ms",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn record_row(r: &RunRecord) -> [String; 10] {
    [
        r.k.to_string(),
        r.loss.to_string(),
        r.hardprune_acc.map(|a| a.to_string()).unwrap_or_default(),
        r.violation.to_string(),
        r.s_prime.to_string(),
        r.s.to_string(),
        r.alpha.to_string(),
        flag(r.soc_w).to_string(),
        flag(r.soc_z).to_string(),
        r.wall_ms.to_string(),
    ]
}

pub fn records_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(record_row(r))?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_bytes(path, &records_csv(records)?)
}

/// Reads back the columns of a records CSV that the summary depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub k: u64,
    pub hardprune_acc: Option<f64>,
    pub violation: f64,
    pub soc_w: bool,
    pub soc_z: bool,
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(HarnessError::Invariant(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers
        )));
    }
    let bad = |what: &str| HarnessError::Invariant(format!("{}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(RecordRow {
            k: rec[0].parse().map_err(|_| bad("k"))?,
            hardprune_acc: match &rec[2] {
                "" => None,
                v => Some(v.parse().map_err(|_| bad("hardprune_acc"))?),
            },
            violation: rec[3].parse().map_err(|_| bad("violation"))?,
            soc_w: &rec[7] == "1",
            soc_z: &rec[8] == "1",
        });
    }
    Ok(rows)
}

/// One method's result on one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub final_violation: f64,
    pub hardprune_acc: f64,
    pub retrain_acc: f64,
    pub total_weights: usize,
    pub nonzero_weights: usize,
    pub compression_rate: f64,
    pub accuracy_threshold: f64,
    /// First evaluated iteration whose hard-prune accuracy reached the
    /// threshold; empty if none did.
    pub iters_to_threshold: Option<u64>,
    /// Iterations where both surrogate conditions held.
    pub soc_both: usize,
}

impl Summary {
    /// `iters_to_threshold` with "never" counted as one past the budget.
    pub fn iters_to_threshold_or_budget(&self) -> u64 {
        self.iters_to_threshold.unwrap_or(self.iterations as u64 + 1)
    }
}

/// Iteration-level derived metrics, recomputable from a records CSV.
pub fn threshold_iteration(rows: impl IntoIterator<Item = (u64, Option<f64>)>, threshold: f64) -> Option<u64> {
    rows.into_iter()
        .find(|(_, acc)| acc.is_some_and(|a| a >= threshold))
        .map(|(k, _)| k)
}

pub fn summaries_csv(rows: &[Summary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionRow {
    pub total_weights: usize,
    pub nonzero_weights: usize,
    pub compression_rate: f64,
    /// `nonzero/total` per layer, `;` separated.
    pub per_layer: String,
}

impl From<&CompressionReport> for CompressionRow {
    fn from(r: &CompressionReport) -> Self {
        Self {
            total_weights: r.total_weights,
            nonzero_weights: r.nonzero_weights,
            compression_rate: r.compression_rate,
            per_layer: r
                .per_layer
                .iter()
                .map(|l| format!("{}/{}", l.nonzero, l.total))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(bytes).map_err(|e| HarnessError::io(path, e))
}
