//! Per-step reward series shared by every optimizer.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rewards::MetricValues;

/// Hex SHA-256 of the JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(config).expect("config serializes to JSON");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub optimizer: String,
    pub seed: u64,
    /// Hex SHA-256 of the run configuration.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Environment steps consumed when the point was recorded.
    pub step: u64,
    pub total_reward: f64,
    pub metrics: MetricValues,
    /// Optimizer-specific columns, aligned with [`RunTrace::extra_columns`].
    pub extra: Vec<f64>,
}

/// Series of points with strictly increasing `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub extra_columns: Vec<String>,
    points: Vec<TracePoint>,
}

impl RunTrace {
    pub fn new(meta: TraceMeta, extra_columns: &[&str]) -> Self {
        Self { meta, extra_columns: extra_columns.iter().map(|s| s.to_string()).collect(), points: Vec::new() }
    }

    /// Appends a point.
    ///
    /// # Panics
    /// If `step` does not exceed the previous step or `extra` has the wrong
    /// length; both are programming errors in the caller.
    pub fn push(&mut self, step: u64, total_reward: f64, metrics: MetricValues, extra: Vec<f64>) {
        if let Some(last) = self.points.last() {
            assert!(step > last.step, "trace steps must increase ({} after {})", step, last.step);
        }
        assert_eq!(extra.len(), self.extra_columns.len(), "extra column count mismatch");
        self.points.push(TracePoint { step, total_reward, metrics, extra });
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    pub fn total_rewards(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total_reward).collect()
    }

    /// Values of one extra column.
    pub fn extra_series(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.extra_columns.iter().position(|c| c == name)?;
        Some(self.points.iter().map(|p| p.extra[idx]).collect())
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string(), "total_reward".to_string()];
        h.extend(MetricValues::NAMES.iter().map(|s| s.to_string()));
        h.extend(self.extra_columns.iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for p in &self.points {
            let mut rec = vec![p.step.to_string(), p.total_reward.to_string()];
            rec.extend(p.metrics.to_array().iter().map(|v| v.to_string()));
            rec.extend(p.extra.iter().map(|v| v.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parses a CSV written by [`RunTrace::write_csv`]. Metadata is not part
    /// of the CSV and must be supplied.
    pub fn read_csv<R: std::io::Read>(input: R, meta: TraceMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let fixed = 2 + MetricValues::NAMES.len();
        if header.len() < fixed || header[0] != "step" || header[1] != "total_reward" {
            return Err(config_err("trace CSV has an unexpected header"));
        }
        let extra: Vec<&str> = header[fixed..].iter().map(String::as_str).collect();
        let mut trace = RunTrace::new(meta, &extra);
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| config_err(format!("bad number in trace CSV: {e}")))
            };
            let step = rec[0].parse::<u64>().map_err(|e| config_err(format!("bad step in trace CSV: {e}")))?;
            let mut metrics = [0.0; 8];
            for (k, m) in metrics.iter_mut().enumerate() {
                *m = num(2 + k)?;
            }
            let extra = (fixed..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
            trace.points.push(TracePoint { step, total_reward: num(1)?, metrics: MetricValues::from_array(metrics), extra });
        }
        Ok(trace)
    }
}
