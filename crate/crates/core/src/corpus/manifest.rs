//! Line-delimited manifest files binding clean utterances to their noisy
//! renditions and speaker labels.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::speaker::Gender;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_index: usize,
    pub gender: Gender,
    pub clean_path: PathBuf,
    pub text_id: Option<String>,
}

/// One noisy version of a clean utterance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoisyRendition {
    pub noise_name: String,
    pub snr_db: f64,
    pub noisy_path: PathBuf,
    /// Post-sum attenuation recorded by the mixer (1.0 = none).
    pub peak_scale: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record: UtteranceRecord,
    pub renditions: Vec<NoisyRendition>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ManifestHeader {
    schema_version: u32,
    split: Split,
    n_speakers: usize,
}

/// Catalog of clean utterances and their noisy renditions for one split.
#[derive(Clone, Debug)]
pub struct PairedManifest {
    pub split: Split,
    pub n_speakers: usize,
    pub entries: Vec<ManifestEntry>,
}

impl PairedManifest {
    pub fn new(split: Split, n_speakers: usize) -> Self {
        PairedManifest {
            split,
            n_speakers,
            entries: Vec::new(),
        }
    }

    pub fn noise_names(&self) -> HashSet<String> {
        self.entries
            .iter()
            .flat_map(|e| e.renditions.iter().map(|r| r.noise_name.clone()))
            .collect()
    }

    pub fn utterance_ids(&self) -> HashSet<String> {
        self.entries
            .iter()
            .map(|e| e.record.utterance_id.clone())
            .collect()
    }

    /// Check that every referenced file exists.
    pub fn validate_files(&self) -> Result<()> {
        for e in &self.entries {
            if !e.record.clean_path.exists() {
                return Err(Error::Manifest(format!(
                    "missing clean file {}",
                    e.record.clean_path.display()
                )));
            }
            for r in &e.renditions {
                if !r.noisy_path.exists() {
                    return Err(Error::Manifest(format!(
                        "missing noisy file {}",
                        r.noisy_path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Write as line-delimited records: a header line, then one entry per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let header = ManifestHeader {
            schema_version: MANIFEST_SCHEMA_VERSION,
            split: self.split,
            n_speakers: self.n_speakers,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?).unwrap();
        for e in &self.entries {
            writeln!(out, "{}", serde_json::to_string(e)?).unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Manifest(format!("{}: empty manifest", path.display())))?;
        let header: ManifestHeader = serde_json::from_str(header_line)?;
        if header.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "{}: schema version {} unsupported (expected {MANIFEST_SCHEMA_VERSION})",
                path.display(),
                header.schema_version
            )));
        }
        let mut entries = Vec::new();
        for line in lines {
            entries.push(serde_json::from_str(line)?);
        }
        Ok(PairedManifest {
            split: header.split,
            n_speakers: header.n_speakers,
            entries,
        })
    }
}

/// Split hygiene: train and test must share no noise name and no utterance id.
pub fn ensure_disjoint(train: &PairedManifest, test: &PairedManifest) -> Result<()> {
    let overlap: Vec<String> = train
        .noise_names()
        .intersection(&test.noise_names())
        .cloned()
        .collect();
    if !overlap.is_empty() {
        return Err(Error::Manifest(format!(
            "noise names present in both splits: {}",
            overlap.join(", ")
        )));
    }
    let utt_overlap: Vec<String> = train
        .utterance_ids()
        .intersection(&test.utterance_ids())
        .cloned()
        .collect();
    if !utt_overlap.is_empty() {
        return Err(Error::Manifest(format!(
            "utterance ids present in both splits: {}",
            utt_overlap.join(", ")
        )));
    }
    Ok(())
}
