//! Per-timestep loss records and their CSV form.
//!
//! CSV columns: `epoch,split,timestep,loss`, where `timestep` is a frame
//! index 11–20 or `mean`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::PAST_FRAMES;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,split,timestep,loss";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: String,
    pub variant: String,
    /// Mean loss of frames 11, 12, …
    pub per_timestep: Vec<f64>,
    pub mean: f64,
    /// Seconds spent producing the record; not written to CSV.
    pub wall_clock: f64,
}

impl MetricsRecord {
    /// The mean is the average of the per-timestep values.
    pub fn new(epoch: usize, split: &str, variant: &str, per_timestep: Vec<f64>, wall_clock: f64) -> Self {
        let mean = per_timestep.iter().sum::<f64>() / per_timestep.len().max(1) as f64;
        MetricsRecord {
            epoch,
            split: split.into(),
            variant: variant.into(),
            per_timestep,
            mean,
            wall_clock,
        }
    }

    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.per_timestep.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", self.epoch, self.split, PAST_FRAMES + 1 + k, v);
        }
        let _ = writeln!(s, "{},{},mean,{}", self.epoch, self.split, self.mean);
        s
    }
}

pub fn render_csv(records: &[MetricsRecord]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in records {
        s.push_str(&r.csv_rows());
    }
    s
}

pub fn write_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    fs::write(path, render_csv(records)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parses a metrics CSV back into records (wall clock and variant unknown).
pub fn read_csv(path: &Path, variant: &str) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Data(format!("{}: missing metrics header", path.display())));
    }
    let bad = |l: &str| Error::Data(format!("{}: malformed row '{l}'", path.display()));
    let mut records: Vec<MetricsRecord> = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(line));
        }
        let epoch: usize = cols[0].parse().map_err(|_| bad(line))?;
        let loss: f64 = cols[3].parse().map_err(|_| bad(line))?;
        if cols[2] == "mean" {
            records.push(MetricsRecord {
                epoch,
                split: cols[1].into(),
                variant: variant.into(),
                per_timestep: std::mem::take(&mut pending),
                mean: loss,
                wall_clock: 0.0,
            });
        } else {
            pending.push(loss);
        }
    }
    Ok(records)
}
