//! Fixed-length training crops drawn from the paired manifest.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::Provenance;

use super::features::FeatureStore;
use super::manifest::PairedManifest;

/// Frame block size imposed by the conversion bottleneck; crop lengths must
/// be a multiple of this.
pub const CROP_BLOCK: usize = 16;

/// One aligned training batch of log-mel crops.
pub struct TrainingBatch {
    /// Per-item noisy crops, each `crop_frames x 80`.
    pub noisy: Vec<Array2<f64>>,
    /// Time-aligned clean crops from the same utterances and offsets.
    pub clean: Vec<Array2<f64>>,
    /// Source speaker index per item.
    pub src: Vec<usize>,
    /// Uniformly sampled target speaker index per item (may equal source).
    pub tgt: Vec<usize>,
}

struct Candidate {
    entry_idx: usize,
    rendition_idx: usize,
}

/// Seeded single-consumer batch stream.
pub struct BatchSampler {
    manifest: PairedManifest,
    candidates: Vec<Candidate>,
    crop_frames: usize,
    batch_size: usize,
    k: usize,
    rng: ChaCha8Rng,
    /// Utterances dropped because they are shorter than one crop.
    pub skipped: usize,
}

impl BatchSampler {
    pub fn new(
        manifest: &PairedManifest,
        store: &mut FeatureStore,
        crop_frames: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if crop_frames == 0 || crop_frames % CROP_BLOCK != 0 {
            return Err(Error::InvalidArgument(format!(
                "crop_frames {crop_frames} must be a positive multiple of {CROP_BLOCK}"
            )));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        let mut candidates = Vec::new();
        let mut skipped = 0;
        for (ei, entry) in manifest.entries.iter().enumerate() {
            let clean = store.get(&entry.record.clean_path, Provenance::Clean)?;
            if clean.nrows() < crop_frames {
                skipped += 1;
                continue;
            }
            for (ri, _r) in entry.renditions.iter().enumerate() {
                candidates.push(Candidate {
                    entry_idx: ei,
                    rendition_idx: ri,
                });
            }
        }
        if candidates.is_empty() {
            return Err(Error::Manifest(
                "no eligible utterance: every entry is shorter than one crop or has no noisy renditions"
                    .into(),
            ));
        }
        Ok(BatchSampler {
            manifest: manifest.clone(),
            candidates,
            crop_frames,
            batch_size,
            k: manifest.n_speakers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            skipped,
        })
    }

    /// Draw the next batch. Never exhausts; sampling is uniform with
    /// replacement over (utterance, rendition, offset).
    pub fn next_batch(&mut self, store: &mut FeatureStore) -> Result<TrainingBatch> {
        let mut batch = TrainingBatch {
            noisy: Vec::with_capacity(self.batch_size),
            clean: Vec::with_capacity(self.batch_size),
            src: Vec::with_capacity(self.batch_size),
            tgt: Vec::with_capacity(self.batch_size),
        };
        for _ in 0..self.batch_size {
            let c = &self.candidates[self.rng.gen_range(0..self.candidates.len())];
            let entry = &self.manifest.entries[c.entry_idx];
            let rendition = &entry.renditions[c.rendition_idx];
            let clean = store.get(&entry.record.clean_path, Provenance::Clean)?;
            let noisy = store.get(&rendition.noisy_path, Provenance::Noisy)?;
            // Mixing never shifts time, but STFT frame counts can differ by
            // one at the edge; align on the shared prefix.
            let usable = clean.nrows().min(noisy.nrows());
            debug_assert!(clean.nrows().abs_diff(noisy.nrows()) <= 1);
            let offset = self.rng.gen_range(0..=usable - self.crop_frames);
            batch.clean.push(
                clean
                    .slice(ndarray::s![offset..offset + self.crop_frames, ..])
                    .to_owned(),
            );
            batch.noisy.push(
                noisy
                    .slice(ndarray::s![offset..offset + self.crop_frames, ..])
                    .to_owned(),
            );
            batch.src.push(entry.record.speaker_index);
            batch.tgt.push(self.rng.gen_range(0..self.k));
        }
        Ok(batch)
    }

    /// Sample a clean crop from a specific speaker (real examples for the
    /// adversarial stage). Returns `None` if the speaker has no eligible
    /// utterance.
    pub fn clean_crop_of_speaker(
        &mut self,
        store: &mut FeatureStore,
        speaker: usize,
    ) -> Result<Option<Array2<f64>>> {
        let options: Vec<usize> = self
            .manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.record.speaker_index == speaker)
            .map(|(i, _)| i)
            .collect();
        if options.is_empty() {
            return Ok(None);
        }
        // Bounded retry over the speaker's utterances for one long enough.
        for _ in 0..16 {
            let ei = options[self.rng.gen_range(0..options.len())];
            let clean = store.get(
                &self.manifest.entries[ei].record.clean_path,
                Provenance::Clean,
            )?;
            if clean.nrows() >= self.crop_frames {
                let offset = self.rng.gen_range(0..=clean.nrows() - self.crop_frames);
                return Ok(Some(
                    clean
                        .slice(ndarray::s![offset..offset + self.crop_frames, ..])
                        .to_owned(),
                ));
            }
        }
        Ok(None)
    }
}
