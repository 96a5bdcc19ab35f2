//! Deterministic DSP front-end: WAV I/O, SNR-exact mixing, STFT, mel
//! filterbank, log-mel features, and Griffin-Lim inversion back to audio.

mod griffin_lim;
mod mel;
mod mix;
mod stft;
mod wav;

pub use griffin_lim::invert_log_mel;
pub use mel::{build_mel_filterbank, MelFilterbank};
pub use mix::{measure_snr_db, mix_at_snr, Mixture};
pub use stft::{istft, stft, ComplexSpectrogram, FRAME_LENGTH, HOP_LENGTH, N_BINS};
pub use wav::{load_wav, write_wav, WavEncoding};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Canonical sample rate for the whole pipeline.
pub const SAMPLE_RATE: u32 = 16_000;
/// Number of mel bands in the feature representation.
pub const N_MELS: usize = 80;
/// Energy floor applied before the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mono PCM audio in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "waveform must have at least one sample".into(),
            ));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "waveform contains non-finite samples".into(),
            ));
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power over the full duration.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }
}

/// Which stage of the pipeline a feature matrix came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Clean,
    Noisy,
    Enhanced,
    Converted,
}

/// T x 80 matrix of natural-log mel energies.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMelSpectrogram {
    pub frames: Array2<f64>,
    pub provenance: Provenance,
}

impl LogMelSpectrogram {
    pub fn new(frames: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if frames.ncols() != N_MELS {
            return Err(Error::InvalidArgument(format!(
                "log-mel must have {N_MELS} bands, got {}",
                frames.ncols()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "log-mel contains non-finite entries".into(),
            ));
        }
        Ok(LogMelSpectrogram { frames, provenance })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}

/// Full feature extraction: STFT power -> mel energies -> floored natural log.
pub fn log_mel(
    wave: &Waveform,
    fb: &MelFilterbank,
    provenance: Provenance,
) -> Result<LogMelSpectrogram> {
    let spec = stft(wave)?;
    let power = spec.power();
    // frames [T, bins] x weights^T [bins, mels]
    let mel = power.dot(&fb.weights.t());
    let frames = mel.mapv(|e| e.max(LOG_FLOOR).ln());
    LogMelSpectrogram::new(frames, provenance)
}
