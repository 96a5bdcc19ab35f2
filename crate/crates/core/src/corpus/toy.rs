//! Synthetic toy corpus: parametric formant speakers pronouncing a shared set
//! of sentence contours, so linguistic content is shared across speakers while
//! spectral identity differs.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::{write_wav, WavEncoding, Waveform, SAMPLE_RATE};

use super::manifest::{ManifestEntry, PairedManifest, Split, UtteranceRecord};
use super::speaker::Gender;

/// Fixed per-speaker voice profile: base pitch, spectral tilt, and three
/// resonance centers.
#[derive(Clone, Debug)]
pub struct SpeakerProfile {
    pub gender: Gender,
    pub base_f0_hz: f64,
    /// Spectral tilt exponent; amplitude falls as (f/200)^tilt above 200 Hz.
    pub tilt: f64,
    pub formants_hz: [f64; 3],
    pub formant_bw_hz: [f64; 3],
    pub formant_gain: [f64; 3],
}

impl SpeakerProfile {
    fn from_rng(index: usize, rng: &mut ChaCha8Rng) -> Self {
        let gender = if index % 2 == 0 {
            Gender::Male
        } else {
            Gender::Female
        };
        let base_f0_hz = match gender {
            Gender::Male => rng.gen_range(95.0..135.0),
            Gender::Female => rng.gen_range(180.0..240.0),
        };
        let tilt = rng.gen_range(-1.1..-0.4);
        let formants_hz = [
            rng.gen_range(350.0..850.0),
            rng.gen_range(1100.0..2100.0),
            rng.gen_range(2400.0..3300.0),
        ];
        let formant_bw_hz = [
            rng.gen_range(70.0..130.0),
            rng.gen_range(100.0..180.0),
            rng.gen_range(150.0..260.0),
        ];
        let formant_gain = [
            rng.gen_range(6.0..14.0),
            rng.gen_range(3.0..9.0),
            rng.gen_range(1.5..5.0),
        ];
        SpeakerProfile {
            gender,
            base_f0_hz,
            tilt,
            formants_hz,
            formant_bw_hz,
            formant_gain,
        }
    }

    /// Spectral envelope (linear amplitude) at frequency f.
    pub fn envelope(&self, f_hz: f64) -> f64 {
        let tilt = if f_hz > 200.0 {
            (f_hz / 200.0).powf(self.tilt)
        } else {
            1.0
        };
        let mut resonance = 1.0;
        for i in 0..3 {
            let d = (f_hz - self.formants_hz[i]) / self.formant_bw_hz[i];
            resonance += self.formant_gain[i] * (-0.5 * d * d).exp();
        }
        tilt * resonance
    }
}

/// Shared "sentence" prosody: a pitch contour and a syllabic amplitude
/// contour, identical for every speaker that pronounces it.
#[derive(Clone, Debug)]
pub struct SentenceContour {
    pub duration_s: f64,
    /// Piecewise-linear relative pitch (multiplier around 1.0), one knot per
    /// 100 ms.
    pub pitch_knots: Vec<f64>,
    /// Syllable (start_s, length_s, peak amplitude).
    pub syllables: Vec<(f64, f64, f64)>,
}

impl SentenceContour {
    fn from_rng(rng: &mut ChaCha8Rng) -> Self {
        let duration_s: f64 = rng.gen_range(1.7..2.3);
        let n_knots = (duration_s / 0.1).ceil() as usize + 1;
        let mut pitch_knots = Vec::with_capacity(n_knots);
        let mut p: f64 = 1.0;
        for _ in 0..n_knots {
            p = (p + rng.gen_range(-0.06..0.06)).clamp(0.8, 1.25);
            pitch_knots.push(p);
        }
        let n_syll = rng.gen_range(4..8);
        let mut syllables = Vec::new();
        let mut t = rng.gen_range(0.02..0.1);
        for _ in 0..n_syll {
            let len = rng.gen_range(0.12..0.28);
            if t + len > duration_s - 0.02 {
                break;
            }
            syllables.push((t, len, rng.gen_range(0.5..1.0)));
            t += len + rng.gen_range(0.02..0.12);
        }
        if syllables.is_empty() {
            syllables.push((0.1, 0.3, 0.8));
        }
        SentenceContour {
            duration_s,
            pitch_knots,
            syllables,
        }
    }

    fn pitch_mult(&self, t_s: f64) -> f64 {
        let pos = t_s / 0.1;
        let i = (pos.floor() as usize).min(self.pitch_knots.len() - 2);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        self.pitch_knots[i] * (1.0 - frac) + self.pitch_knots[i + 1] * frac
    }

    fn amplitude(&self, t_s: f64) -> f64 {
        let mut a = 0.0;
        for &(start, len, peak) in &self.syllables {
            if t_s >= start && t_s < start + len {
                let phase = (t_s - start) / len;
                a += peak * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos());
            }
        }
        a
    }
}

/// Render one sentence with one speaker's voice as additive harmonics under
/// the speaker's spectral envelope.
pub fn render_utterance(profile: &SpeakerProfile, contour: &SentenceContour) -> Waveform {
    let sr = SAMPLE_RATE as f64;
    let n = (contour.duration_s * sr).round() as usize;
    let max_harmonic_hz = 7500.0;
    let mut samples = vec![0.0f64; n];
    // Phase-continuous harmonic synthesis under a time-varying f0.
    let min_f0 = profile.base_f0_hz * 0.8;
    let n_harmonics = (max_harmonic_hz / min_f0).floor() as usize;
    let mut phases = vec![0.0f64; n_harmonics + 1];
    for (i, s) in samples.iter_mut().enumerate() {
        let t_s = i as f64 / sr;
        let f0 = profile.base_f0_hz * contour.pitch_mult(t_s);
        let amp = contour.amplitude(t_s);
        let mut acc = 0.0;
        for h in 1..=n_harmonics {
            let fh = h as f64 * f0;
            if fh >= max_harmonic_hz {
                break;
            }
            phases[h] += 2.0 * std::f64::consts::PI * fh / sr;
            if amp > 0.0 {
                acc += profile.envelope(fh) * phases[h].sin();
            }
        }
        *s = amp * acc;
    }
    // Fixed headroom normalization; deterministic given the contour/profile.
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let g = 0.6 / peak;
        for s in &mut samples {
            *s *= g;
        }
    }
    Waveform {
        samples,
        sample_rate_hz: SAMPLE_RATE,
    }
}

/// Deterministic speaker profiles for a corpus seed.
pub fn speaker_profiles(n_speakers: usize, seed: u64) -> Vec<SpeakerProfile> {
    (0..n_speakers)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + k as u64));
            SpeakerProfile::from_rng(k, &mut rng)
        })
        .collect()
}

/// Deterministic shared sentence contours for a corpus seed.
pub fn sentence_contours(n_sentences: usize, seed: u64) -> Vec<SentenceContour> {
    (0..n_sentences)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x7e47_0000 + j as u64));
            SentenceContour::from_rng(&mut rng)
        })
        .collect()
}

/// Generate the clean toy corpus under `root/<speaker>/<utt>.wav` and return
/// its manifest (no noisy renditions yet). Deterministic under `seed`.
pub fn make_toy_corpus(
    root: &Path,
    n_speakers: usize,
    utts_per_speaker: usize,
    seed: u64,
) -> Result<PairedManifest> {
    if n_speakers < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 speakers, got {n_speakers}"
        )));
    }
    if utts_per_speaker < 1 {
        return Err(Error::InvalidArgument(
            "need at least 1 utterance per speaker".into(),
        ));
    }
    let profiles = speaker_profiles(n_speakers, seed);
    let contours = sentence_contours(utts_per_speaker, seed);

    let mut manifest = PairedManifest::new(Split::Train, n_speakers);
    for (k, profile) in profiles.iter().enumerate() {
        let speaker_dir = root.join(format!("spk{k:02}"));
        fs::create_dir_all(&speaker_dir).map_err(|e| Error::io(&speaker_dir, e))?;
        for (j, contour) in contours.iter().enumerate() {
            let wave = render_utterance(profile, contour);
            let path = speaker_dir.join(format!("sent{j:03}.wav"));
            write_wav(&path, &wave, WavEncoding::Pcm16)?;
            manifest.entries.push(ManifestEntry {
                record: UtteranceRecord {
                    utterance_id: format!("spk{k:02}_sent{j:03}"),
                    speaker_index: k,
                    gender: profile.gender,
                    clean_path: path,
                    text_id: Some(format!("sent{j:03}")),
                },
                renditions: Vec::new(),
            });
        }
    }
    Ok(manifest)
}

/// Hold out the last `test_sentences` sentence ids (for every speaker) as the
/// test split. Sentences are shared across speakers, so every test utterance
/// has a parallel rendition by every other speaker.
pub fn split_by_sentence(
    manifest: &PairedManifest,
    test_sentences: usize,
    total_sentences: usize,
) -> Result<(PairedManifest, PairedManifest)> {
    if test_sentences == 0 || test_sentences >= total_sentences {
        return Err(Error::InvalidArgument(format!(
            "test sentence count {test_sentences} must be in 1..{total_sentences}"
        )));
    }
    let cutoff = total_sentences - test_sentences;
    let mut train = PairedManifest::new(Split::Train, manifest.n_speakers);
    let mut test = PairedManifest::new(Split::Test, manifest.n_speakers);
    for e in &manifest.entries {
        let text =
            e.record.text_id.as_deref().ok_or_else(|| {
                Error::Manifest(format!("{} has no text id", e.record.utterance_id))
            })?;
        let idx: usize = text
            .trim_start_matches("sent")
            .parse()
            .map_err(|_| Error::Manifest(format!("bad text id {text}")))?;
        if idx < cutoff {
            train.entries.push(e.clone());
        } else {
            test.entries.push(e.clone());
        }
    }
    Ok((train, test))
}
