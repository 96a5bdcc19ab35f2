//! Triangular mel filterbank on the HTK mel scale, peak-normalized.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::stft::N_BINS;
use super::SAMPLE_RATE;

/// `n_mels x n_bins` nonnegative triangular filters.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Build `n_mels` triangular filters with peaks equally spaced on the mel
/// scale between `fmin_hz` and `fmax_hz`, each row peak-normalized to 1.
pub fn build_mel_filterbank(
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    n_bins: usize,
) -> Result<MelFilterbank> {
    let nyquist = SAMPLE_RATE as f64 / 2.0;
    if !(0.0 <= fmin_hz && fmin_hz < fmax_hz) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= fmin < fmax, got fmin={fmin_hz}, fmax={fmax_hz}"
        )));
    }
    if fmax_hz > nyquist {
        return Err(Error::InvalidArgument(format!(
            "fmax {fmax_hz} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be positive".into()));
    }
    assert_eq!(n_bins, N_BINS, "filterbank sized for the fixed STFT");

    // n_mels + 2 edge points, uniformly spaced in mel.
    let mel_lo = hz_to_mel(fmin_hz);
    let mel_hi = hz_to_mel(fmax_hz);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|b| b as f64 * nyquist / (n_bins - 1) as f64)
        .collect();

    let mut weights = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, peak, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row_max = 0.0f64;
        for (b, &f) in bin_hz.iter().enumerate() {
            let w = if f > lo && f < peak {
                (f - lo) / (peak - lo)
            } else if (f - peak).abs() < 1e-12 {
                1.0
            } else if f > peak && f < hi {
                (hi - f) / (hi - peak)
            } else {
                0.0
            };
            weights[[m, b]] = w;
            row_max = row_max.max(w);
        }
        if row_max <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "mel filter {m} covers no FFT bin; reduce n_mels or widen the band"
            )));
        }
        for b in 0..n_bins {
            weights[[m, b]] /= row_max;
        }
    }
    Ok(MelFilterbank {
        weights,
        fmin_hz,
        fmax_hz,
    })
}

impl MelFilterbank {
    pub fn default_for_pipeline() -> MelFilterbank {
        build_mel_filterbank(super::N_MELS, 0.0, SAMPLE_RATE as f64 / 2.0, N_BINS)
            .expect("default filterbank config is valid")
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_interior_bin_has_weight() {
        let fb = build_mel_filterbank(80, 0.0, 8000.0, N_BINS).unwrap();
        // Column-sum oracle: every FFT bin strictly inside (0, 8000) Hz must
        // be touched by at least one filter.
        for b in 1..N_BINS - 1 {
            let total: f64 = (0..80).map(|m| fb.weights[[m, b]]).sum();
            assert!(total > 0.0, "bin {b} uncovered");
        }
    }

    #[test]
    fn rows_are_unimodal_triangles() {
        let fb = build_mel_filterbank(80, 0.0, 8000.0, N_BINS).unwrap();
        for m in 0..80 {
            let row: Vec<f64> = (0..N_BINS).map(|b| fb.weights[[m, b]]).collect();
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            for w in row[..peak].windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "row {m} not rising before peak");
            }
            for w in row[peak..].windows(2) {
                assert!(w[0] >= w[1] - 1e-12, "row {m} not falling after peak");
            }
            assert!(
                (row[peak] - 1.0).abs() < 1e-12,
                "row {m} not peak-normalized"
            );
        }
    }

    #[test]
    fn too_many_mels_is_error() {
        assert!(build_mel_filterbank(600, 0.0, 8000.0, N_BINS).is_err());
    }

    #[test]
    fn fmax_above_nyquist_is_error() {
        assert!(build_mel_filterbank(80, 0.0, 9000.0, N_BINS).is_err());
    }
}
