//! Mel-cepstrum extraction: orthonormal DCT-II of each log-mel frame.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::signal::N_MELS;

/// Cepstral order used throughout evaluation (coefficient 0 extra).
pub const CEPSTRUM_ORDER: usize = 24;

/// Per-frame mel-cepstra, `frames` is T x (order+1); column 0 is energy.
#[derive(Clone, Debug)]
pub struct MelCepstra {
    pub frames: Array2<f64>,
    pub order: usize,
}

/// Orthonormal DCT-II analysis matrix with `rows` coefficients over `n` bands.
pub fn dct_matrix(n: usize, rows: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, n));
    for k in 0..rows {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for j in 0..n {
            let angle = std::f64::consts::PI / n as f64 * (j as f64 + 0.5) * k as f64;
            m[[k, j]] = scale * angle.cos();
        }
    }
    m
}

pub fn mel_cepstra(lms: &Array2<f64>, order: usize) -> Result<MelCepstra> {
    if lms.ncols() != N_MELS {
        return Err(Error::InvalidArgument(format!(
            "expected {N_MELS} mel bands per frame, got {}",
            lms.ncols()
        )));
    }
    if order + 1 > N_MELS {
        return Err(Error::InvalidArgument(format!(
            "cepstrum order {order} out of range: order+1 must not exceed {N_MELS}"
        )));
    }
    let dct = dct_matrix(N_MELS, order + 1);
    Ok(MelCepstra {
        frames: lms.dot(&dct.t()),
        order,
    })
}
