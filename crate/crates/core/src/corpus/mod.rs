//! Synthetic parallel corpus: toy speakers, procedural noises, noisy
//! renditions at fixed SNRs, manifests, feature caching, and batch sampling.

pub mod batch;
pub mod features;
pub mod manifest;
pub mod noise;
pub mod speaker;
pub mod synth;
pub mod toy;

pub use batch::{BatchSampler, TrainingBatch, CROP_BLOCK};
pub use features::FeatureStore;
pub use manifest::{
    ensure_disjoint, ManifestEntry, NoisyRendition, PairedManifest, Split, UtteranceRecord,
};
pub use noise::{NoiseKind, DEFAULT_TEST_NOISES, DEFAULT_TRAIN_NOISES};
pub use speaker::{speaker_onehot, Gender, SpeakerAttribute};
pub use synth::synthesize_noisy;
pub use toy::{
    make_toy_corpus, render_utterance, sentence_contours, speaker_profiles, split_by_sentence,
};
