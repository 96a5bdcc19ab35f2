//! Cached log-mel feature extraction over manifest files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;

use crate::error::Result;
use crate::signal::{load_wav, log_mel, MelFilterbank, Provenance};

/// Extracts and memoizes log-mel features per file path.
pub struct FeatureStore {
    fb: MelFilterbank,
    cache: HashMap<PathBuf, Arc<Array2<f64>>>,
}

impl FeatureStore {
    pub fn new() -> Self {
        FeatureStore {
            fb: MelFilterbank::default_for_pipeline(),
            cache: HashMap::new(),
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.fb
    }

    pub fn get(&mut self, path: &Path, provenance: Provenance) -> Result<Arc<Array2<f64>>> {
        if let Some(hit) = self.cache.get(path) {
            return Ok(hit.clone());
        }
        let wave = load_wav(path, false)?;
        let lms = log_mel(&wave, &self.fb, provenance)?;
        let arc = Arc::new(lms.frames);
        self.cache.insert(path.to_path_buf(), arc.clone());
        Ok(arc)
    }
}

impl Default for FeatureStore {
    fn default() -> Self {
        Self::new()
    }
}
