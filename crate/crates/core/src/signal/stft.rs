//! Short-time Fourier transform with centered frames and reflect padding.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

use super::Waveform;

/// Analysis frame length in samples (64 ms at 16 kHz).
pub const FRAME_LENGTH: usize = 1024;
/// Hop between frames in samples (16 ms at 16 kHz).
pub const HOP_LENGTH: usize = 256;
/// One-sided spectrum size.
pub const N_BINS: usize = FRAME_LENGTH / 2 + 1;

/// One-sided complex spectrogram, frames along axis 0.
#[derive(Clone, Debug)]
pub struct ComplexSpectrogram {
    pub frames: Array2<Complex<f64>>,
    pub frame_length_samples: usize,
    pub hop_samples: usize,
}

impl ComplexSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    /// Per-bin magnitude-squared power.
    pub fn power(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm_sqr())
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm())
    }
}

/// Periodic Hann window.
pub(crate) fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

fn reflect_pad(samples: &[f64], pad: usize) -> Vec<f64> {
    let n = samples.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        out.push(samples[pad - i]);
    }
    out.extend_from_slice(samples);
    for i in 0..pad {
        out.push(samples[n - 2 - i]);
    }
    out
}

/// Centered STFT: reflect padding of half a frame on each side, periodic Hann
/// window, one-sided spectrum. Frame t covers padded samples
/// `[t*hop, t*hop + frame)`.
pub fn stft(wave: &Waveform) -> Result<ComplexSpectrogram> {
    if wave.samples.len() < FRAME_LENGTH {
        return Err(Error::AudioTooShort {
            got: wave.samples.len(),
            need: FRAME_LENGTH,
        });
    }
    let pad = FRAME_LENGTH / 2;
    let padded = reflect_pad(&wave.samples, pad);
    let n_frames = 1 + (padded.len() - FRAME_LENGTH) / HOP_LENGTH;
    let window = hann_window(FRAME_LENGTH);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FRAME_LENGTH);
    let mut frames = Array2::zeros((n_frames, N_BINS));
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LENGTH];
    for t in 0..n_frames {
        let start = t * HOP_LENGTH;
        for i in 0..FRAME_LENGTH {
            buf[i] = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (b, &v) in buf.iter().take(N_BINS).enumerate() {
            frames[[t, b]] = v;
        }
    }
    Ok(ComplexSpectrogram {
        frames,
        frame_length_samples: FRAME_LENGTH,
        hop_samples: HOP_LENGTH,
    })
}

/// Inverse STFT by windowed overlap-add with squared-window normalization.
/// Returns `(n_frames - 1) * hop` samples (the center padding is trimmed).
pub fn istft(spec: &ComplexSpectrogram) -> Waveform {
    let n_frames = spec.n_frames();
    let frame = spec.frame_length_samples;
    let hop = spec.hop_samples;
    let padded_len = (n_frames - 1) * hop + frame;
    let window = hann_window(frame);

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(frame);
    let mut signal = vec![0.0; padded_len];
    let mut wsum = vec![0.0; padded_len];
    let mut buf = vec![Complex::new(0.0, 0.0); frame];
    for t in 0..n_frames {
        for b in 0..N_BINS {
            buf[b] = spec.frames[[t, b]];
        }
        for b in N_BINS..frame {
            buf[b] = spec.frames[[t, frame - b]].conj();
        }
        ifft.process(&mut buf);
        let start = t * hop;
        for i in 0..frame {
            let s = buf[i].re / frame as f64;
            signal[start + i] += s * window[i];
            wsum[start + i] += window[i] * window[i];
        }
    }
    for (s, w) in signal.iter_mut().zip(&wsum) {
        if *w > 1e-12 {
            *s /= *w;
        }
    }
    // Trim the half-frame center padding.
    let pad = frame / 2;
    let core_len = padded_len.saturating_sub(2 * pad).max(1);
    let samples = signal[pad..pad + core_len].to_vec();
    Waveform {
        samples,
        sample_rate_hz: super::SAMPLE_RATE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive O(N^2) DFT of one windowed frame, written directly from the
    /// transform definition. Independent oracle for the FFT path.
    fn naive_frame_dft(padded: &[f64], start: usize) -> Vec<Complex<f64>> {
        let window = hann_window(FRAME_LENGTH);
        let mut out = Vec::with_capacity(N_BINS);
        for k in 0..N_BINS {
            let mut acc = Complex::new(0.0, 0.0);
            for n in 0..FRAME_LENGTH {
                let x = padded[start + n] * window[n];
                let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / FRAME_LENGTH as f64;
                acc += Complex::new(x * ang.cos(), x * ang.sin());
            }
            out.push(acc);
        }
        out
    }

    fn sine(freq: f64, n: usize) -> Waveform {
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
            .collect();
        Waveform::new(samples, 16000).unwrap()
    }

    #[test]
    fn frame_count_matches_padding_formula() {
        let w = Waveform::new(vec![0.0; 4096], 16000).unwrap();
        let spec = stft(&w).unwrap();
        // padded length 4096 + 1024, frames = 1 + (5120 - 1024)/256
        assert_eq!(spec.n_frames(), 1 + (4096 + 1024 - 1024) / 256);
        assert!(spec.frames.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn pure_tone_peaks_at_expected_bin() {
        // 1 kHz at 16 kHz with 1024-point frames: bin 64.
        let spec = stft(&sine(1000.0, 8192)).unwrap();
        for t in 1..spec.n_frames() - 1 {
            let mags: Vec<f64> = (0..N_BINS).map(|b| spec.frames[[t, b]].norm()).collect();
            let peak = mags
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(peak, 64, "frame {t}");
        }
    }

    #[test]
    fn matches_naive_dft_on_random_signal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let spec = stft(&w).unwrap();
        let padded = reflect_pad(&w.samples, FRAME_LENGTH / 2);
        let max_mag = spec.frames.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for t in 0..spec.n_frames() {
            let oracle = naive_frame_dft(&padded, t * HOP_LENGTH);
            for b in 0..N_BINS {
                let diff = (spec.frames[[t, b]] - oracle[b]).norm();
                assert!(diff / max_mag < 1e-6, "frame {t} bin {b}: {diff}");
            }
        }
    }

    #[test]
    fn too_short_is_error() {
        let w = Waveform::new(vec![0.1; 512], 16000).unwrap();
        assert!(matches!(
            stft(&w),
            Err(crate::error::Error::AudioTooShort { .. })
        ));
    }

    #[test]
    fn istft_reconstructs_signal() {
        let w = sine(440.0, 8192);
        let spec = stft(&w).unwrap();
        let rec = istft(&spec);
        // Compare the interior (edges are affected by padding policy).
        let n = rec.samples.len().min(w.samples.len());
        for i in 1024..n - 1024 {
            assert!((rec.samples[i] - w.samples[i]).abs() < 1e-8, "sample {i}");
        }
    }
}
