//! Approximate inversion of log-mel features to audio: pseudo-inverse of the
//! mel filterbank back to a linear power spectrum, then Griffin-Lim phase
//! reconstruction. Stands in for a neural vocoder.

use ndarray::Array2;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};

use super::stft::{istft, stft, ComplexSpectrogram, FRAME_LENGTH, HOP_LENGTH, N_BINS};
use super::{LogMelSpectrogram, MelFilterbank, Waveform};

/// Nonnegative least-squares estimate of linear power bins from mel
/// energies: minimize ||P W^T - M||^2 over P >= 0 by multiplicative updates.
/// The unconstrained pseudo-inverse has large negative lobes and clamping
/// them wrecks the mel fidelity; the NNLS solution stays faithful.
fn mel_to_linear_power(mel_power: &Array2<f64>, fb: &MelFilterbank) -> Array2<f64> {
    const ITERS: usize = 200;
    const EPS: f64 = 1e-30;
    let w = &fb.weights; // [mels, bins]
    let wtw = w.t().dot(w); // [bins, bins]
    let numer = mel_power.dot(w); // [T, bins], nonnegative
    let mut p = numer.clone();
    for _ in 0..ITERS {
        let denom = p.dot(&wtw); // [T, bins]
        ndarray::Zip::from(&mut p)
            .and(&numer)
            .and(&denom)
            .for_each(|p, &n, &d| {
                *p *= n / (d + EPS);
            });
    }
    p
}

/// Invert a log-mel spectrogram to audio with `n_iters` Griffin-Lim rounds.
/// Zero-phase initialization keeps the output deterministic.
pub fn invert_log_mel(
    lms: &LogMelSpectrogram,
    fb: &MelFilterbank,
    n_iters: usize,
) -> Result<Waveform> {
    if n_iters < 1 {
        return Err(Error::InvalidArgument("n_iters must be at least 1".into()));
    }
    let mel_power = lms.frames.mapv(f64::exp); // [T, mels]
    let linear_power = mel_to_linear_power(&mel_power, fb); // [T, bins]
    let magnitude = linear_power.mapv(f64::sqrt);

    // Fixed-seed random phase: zero phase piles frame energy under the window
    // nulls and Griffin-Lim stagnates there. A seeded start keeps the whole
    // inversion deterministic.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x474c_u64);
    let t_len = magnitude.nrows();
    let mut spec = ComplexSpectrogram {
        frames: Array2::from_shape_fn((t_len, N_BINS), |(t, b)| {
            let phase = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            Complex::from_polar(magnitude[[t, b]], phase)
        }),
        frame_length_samples: FRAME_LENGTH,
        hop_samples: HOP_LENGTH,
    };

    let mut wave = istft(&spec);
    for _ in 0..n_iters {
        if wave.samples.len() < FRAME_LENGTH {
            break; // too short to re-analyze; keep the current estimate
        }
        let reanalyzed = stft(&wave)?;
        let t_common = reanalyzed.n_frames().min(t_len);
        for t in 0..t_common {
            for b in 0..N_BINS {
                let phase = reanalyzed.frames[[t, b]].arg();
                spec.frames[[t, b]] = Complex::from_polar(magnitude[[t, b]], phase);
            }
        }
        wave = istft(&spec);
    }
    Ok(wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{log_mel, Provenance, LOG_FLOOR};

    fn chirp(n: usize) -> Waveform {
        // Speech-band sweep with a slow amplitude contour.
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                let f = 200.0 + 1500.0 * t;
                let amp = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * 1.5 * t).sin()) * 0.4;
                amp * (2.0 * std::f64::consts::PI * f * t).sin()
            })
            .collect();
        Waveform::new(samples, 16000).unwrap()
    }

    #[test]
    fn zero_iters_is_error() {
        let fb = MelFilterbank::default_for_pipeline();
        let lms = LogMelSpectrogram::new(
            ndarray::Array2::from_elem((10, 80), LOG_FLOOR.ln()),
            Provenance::Clean,
        )
        .unwrap();
        assert!(invert_log_mel(&lms, &fb, 0).is_err());
    }

    #[test]
    fn all_floor_lms_is_near_silent() {
        let fb = MelFilterbank::default_for_pipeline();
        let lms = LogMelSpectrogram::new(
            ndarray::Array2::from_elem((20, 80), LOG_FLOOR.ln()),
            Provenance::Clean,
        )
        .unwrap();
        let wave = invert_log_mel(&lms, &fb, 4).unwrap();
        assert!(wave.rms() < 1e-3, "rms {}", wave.rms());
    }

    #[test]
    fn reconstruction_error_decreases_with_iterations() {
        let fb = MelFilterbank::default_for_pipeline();
        let src = chirp(8192);
        let lms = log_mel(&src, &fb, Provenance::Clean).unwrap();
        let mut errors = Vec::new();
        for iters in [1usize, 8, 32] {
            let rec = invert_log_mel(&lms, &fb, iters).unwrap();
            let rec_lms = log_mel(&rec, &fb, Provenance::Clean).unwrap();
            let t = rec_lms.n_frames().min(lms.n_frames());
            let mut err = 0.0;
            for i in 0..t {
                for m in 0..80 {
                    err += (rec_lms.frames[[i, m]] - lms.frames[[i, m]]).powi(2);
                }
            }
            errors.push(err / (t * 80) as f64);
        }
        assert!(errors[1] < errors[0], "errors {errors:?}");
        assert!(errors[2] < errors[1], "errors {errors:?}");
    }
}
