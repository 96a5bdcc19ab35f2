//! Training configuration: stage lengths, loss weights, optimizer settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::Lambdas;
use crate::models::ModelProfile;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Test/desk profile: conv channels 16, recurrent cells 8.
    Tiny,
    /// Published layer sizes. Recorded for completeness; the published step
    /// counts (220k/905k/380k) are far beyond desk scale.
    Paper,
}

impl ProfileKind {
    pub fn model_profile(&self) -> ModelProfile {
        match self {
            ProfileKind::Tiny => ModelProfile::tiny(),
            ProfileKind::Paper => ModelProfile::paper(),
        }
    }
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// SE pretraining steps (stage 2).
    pub stage2_steps: usize,
    /// Joint SE+VC steps (stage 3).
    pub stage3_steps: usize,
    /// Adversarial steps (stage 4).
    pub stage4_steps: usize,
    pub lambdas: Lambdas,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub lr_classifier: f64,
    pub batch_size: usize,
    pub crop_frames: usize,
    pub seed: u64,
    pub profile: ProfileKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage2_steps: 2_000,
            stage3_steps: 5_000,
            stage4_steps: 2_000,
            lambdas: Lambdas::default(),
            lr_generator: 1e-4,
            lr_discriminator: 1e-4,
            lr_classifier: 1e-4,
            batch_size: 2,
            crop_frames: 96,
            seed: 7,
            profile: ProfileKind::Tiny,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_frames == 0 || self.crop_frames % 16 != 0 {
            return Err(Error::InvalidArgument(format!(
                "crop_frames {} must be a positive multiple of 16",
                self.crop_frames
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        let l = &self.lambdas;
        for (name, v) in [
            ("lambda_auto", l.auto),
            ("lambda_cls", l.cls),
            ("lambda_cyc", l.cyc),
            ("lambda_idm", l.idm),
            ("lambda_gp", l.gp),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be >= 0")));
            }
        }
        for (name, v) in [
            ("lr_generator", self.lr_generator),
            ("lr_discriminator", self.lr_discriminator),
            ("lr_classifier", self.lr_classifier),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    /// Canonical serialized form, embedded in checkpoints.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Human-readable list of fields that differ between two config JSON blobs.
pub fn diff_config_json(a: &str, b: &str) -> Vec<String> {
    let pa: serde_json::Value = serde_json::from_str(a).unwrap_or(serde_json::Value::Null);
    let pb: serde_json::Value = serde_json::from_str(b).unwrap_or(serde_json::Value::Null);
    let mut out = Vec::new();
    diff_values("", &pa, &pb, &mut out);
    out
}

fn diff_values(path: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<String>) {
    match (a, b) {
        (serde_json::Value::Object(ma), serde_json::Value::Object(mb)) => {
            let keys: std::collections::BTreeSet<_> = ma.keys().chain(mb.keys()).collect();
            for k in keys {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                let null = serde_json::Value::Null;
                diff_values(
                    &sub,
                    ma.get(k).unwrap_or(&null),
                    mb.get(k).unwrap_or(&null),
                    out,
                );
            }
        }
        _ if a != b => out.push(format!("{path}: {a} != {b}")),
        _ => {}
    }
}
