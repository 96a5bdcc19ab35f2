//! Append-only per-step training log, one line-delimited record per
//! optimization step.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: String,
    pub step: u64,
    pub losses: BTreeMap<String, f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn new() -> Self {
        TrainingLog {
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, stage: &str, step: u64, losses: BTreeMap<String, f64>, wall_ms: u64) {
        self.records.push(LogRecord {
            stage: stage.to_string(),
            step,
            losses,
            wall_ms,
        });
    }

    pub fn extend(&mut self, other: TrainingLog) {
        self.records.extend(other.records);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line)?);
        }
        Ok(TrainingLog { records })
    }

    /// Structural and numerical equality of the loss streams within `tol`
    /// (wall-clock fields are ignored).
    pub fn losses_match(&self, other: &TrainingLog, tol: f64) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.stage == b.stage
                    && a.step == b.step
                    && a.losses.len() == b.losses.len()
                    && a.losses
                        .iter()
                        .zip(&b.losses)
                        .all(|((ka, va), (kb, vb))| ka == kb && (va - vb).abs() <= tol)
            })
    }
}
