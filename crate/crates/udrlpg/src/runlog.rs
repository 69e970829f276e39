//! Per-stage training log and its CSV form.
//!
//! CSV header: `stage,env_steps,mean_return,max_return,best_return,loss_mean,
//! skipped_updates,bucket_0,...,bucket_{n-1}`. `stage` counts completed
//! stages (the first record is stage 1), `env_steps` is cumulative and
//! includes the random initialization, `best_return` is the running maximum
//! of every return observed so far. Wall-clock times are kept apart, in
//! `timing.csv` (`stage,wall_seconds`), so the log itself is reproducible
//! byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdrlpgError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub env_steps: u64,
    pub mean_return: f64,
    pub max_return: f64,
    pub best_return: f64,
    pub loss_mean: f64,
    pub skipped_updates: usize,
    pub bucket_occupancy: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<StageRecord>,
    /// Seconds spent in each stage, parallel to `records`.
    pub wall_times: Vec<f64>,
}

const FIXED_COLUMNS: [&str; 7] = [
    "stage",
    "env_steps",
    "mean_return",
    "max_return",
    "best_return",
    "loss_mean",
    "skipped_updates",
];

impl RunLog {
    pub fn push(&mut self, record: StageRecord, wall_seconds: f64) {
        self.records.push(record);
        self.wall_times.push(wall_seconds);
    }

    pub fn last(&self) -> Option<&StageRecord> {
        self.records.last()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let n_buckets = self.records.first().map_or(0, |r| r.bucket_occupancy.len());
        let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..n_buckets).map(|i| format!("bucket_{i}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.stage.to_string(),
                r.env_steps.to_string(),
                r.mean_return.to_string(),
                r.max_return.to_string(),
                r.best_return.to_string(),
                r.loss_mean.to_string(),
                r.skipped_updates.to_string(),
            ];
            row.extend(r.bucket_occupancy.iter().map(|b| b.to_string()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| UdrlpgError::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| UdrlpgError::io(path, e))
    }

    pub fn write_timing_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["stage", "wall_seconds"])?;
        for (r, t) in self.records.iter().zip(&self.wall_times) {
            w.write_record([r.stage.to_string(), t.to_string()])?;
        }
        w.flush().map_err(|e| UdrlpgError::io(path, e))?;
        Ok(())
    }

    /// Parses a log written by [`RunLog::to_csv_string`]. Wall times are not
    /// part of the CSV and come back empty.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let n_fixed = FIXED_COLUMNS.len();
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| -> Result<&str> {
                row.get(i).ok_or_else(|| UdrlpgError::Invalid(format!("runlog row is missing column {i}")))
            };
            let num = |i: usize| -> Result<f64> {
                field(i)?.parse().map_err(|_| UdrlpgError::Invalid(format!("bad number in runlog column {i}")))
            };
            let int = |i: usize| -> Result<u64> {
                field(i)?.parse().map_err(|_| UdrlpgError::Invalid(format!("bad integer in runlog column {i}")))
            };
            records.push(StageRecord {
                stage: int(0)? as usize,
                env_steps: int(1)?,
                mean_return: num(2)?,
                max_return: num(3)?,
                best_return: num(4)?,
                loss_mean: num(5)?,
                skipped_updates: int(6)? as usize,
                bucket_occupancy: (n_fixed..row.len()).map(|i| int(i).map(|v| v as usize)).collect::<Result<_>>()?,
            });
        }
        Ok(Self {
            records,
            wall_times: Vec::new(),
        })
    }
}
