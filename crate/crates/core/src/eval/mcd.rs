//! DTW alignment and mel-cepstral distortion.

use crate::error::{Error, Result};

use super::cepstra::MelCepstra;

/// dB conversion constant in the MCD formula.
const MCD_SCALE: f64 = 10.0 / std::f64::consts::LN_10;

fn check_pair(a: &MelCepstra, b: &MelCepstra) -> Result<()> {
    if a.frames.nrows() == 0 || b.frames.nrows() == 0 {
        return Err(Error::Eval("cannot align empty cepstral sequences".into()));
    }
    if a.order != b.order {
        return Err(Error::Eval(format!(
            "cepstrum order mismatch: {} vs {}",
            a.order, b.order
        )));
    }
    Ok(())
}

/// Euclidean distance over coefficients 1..=order; energy (c0) excluded.
fn frame_distance(a: &MelCepstra, b: &MelCepstra, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for d in 1..=a.order {
        let diff = a.frames[[i, d]] - b.frames[[j, d]];
        s += diff * diff;
    }
    s.sqrt()
}

fn cost_matrix(a: &MelCepstra, b: &MelCepstra) -> Vec<Vec<f64>> {
    let (m, n) = (a.frames.nrows(), b.frames.nrows());
    let mut acc = vec![vec![f64::INFINITY; n]; m];
    for i in 0..m {
        for j in 0..n {
            let d = frame_distance(a, b, i, j);
            let prior = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 {
                    best = best.min(acc[i - 1][j]);
                }
                if j > 0 {
                    best = best.min(acc[i][j - 1]);
                }
                if i > 0 && j > 0 {
                    best = best.min(acc[i - 1][j - 1]);
                }
                best
            };
            acc[i][j] = d + prior;
        }
    }
    acc
}

/// Optimal accumulated path cost with steps {(1,0),(0,1),(1,1)}, endpoints anchored.
pub fn dtw_cost(a: &MelCepstra, b: &MelCepstra) -> Result<f64> {
    check_pair(a, b)?;
    let acc = cost_matrix(a, b);
    Ok(acc[a.frames.nrows() - 1][b.frames.nrows() - 1])
}

/// Monotone alignment path from (0,0) to (m-1,n-1) achieving `dtw_cost`.
pub fn dtw_align(a: &MelCepstra, b: &MelCepstra) -> Result<Vec<(usize, usize)>> {
    check_pair(a, b)?;
    let acc = cost_matrix(a, b);
    let (mut i, mut j) = (a.frames.nrows() - 1, b.frames.nrows() - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 {
            acc[i - 1][j - 1]
        } else {
            f64::INFINITY
        };
        let up = if i > 0 { acc[i - 1][j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i][j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(path)
}

/// Mel-cepstral distortion in dB, averaged over the DTW-aligned frame pairs:
/// (10/ln 10) * sqrt(2 * sum_{d=1..D} (a_d - b_d)^2).
pub fn mcd(a: &MelCepstra, b: &MelCepstra) -> Result<f64> {
    let path = dtw_align(a, b)?;
    let total: f64 = path
        .iter()
        .map(|&(i, j)| MCD_SCALE * (2.0_f64).sqrt() * frame_distance(a, b, i, j))
        .sum();
    Ok(total / path.len() as f64)
}
