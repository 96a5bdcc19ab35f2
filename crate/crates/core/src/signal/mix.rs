//! SNR-exact additive noise mixing.

use crate::error::{Error, Result};

use super::Waveform;

/// A noisy mixture plus the bookkeeping needed to audit it.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub wave: Waveform,
    /// Noise gain applied before summation.
    pub noise_gain: f64,
    /// Post-sum attenuation applied to keep samples in [-1, 1]; 1.0 when no
    /// clipping protection was needed. Scaling the whole mixture preserves
    /// the SNR.
    pub peak_scale: f64,
}

/// Mix `noise` into `clean` at exactly `snr_db`, measured over the full
/// overlap. Noise shorter than the clean signal is looped; longer noise is
/// cropped. The mixture is not re-normalized except for a uniform scale-down
/// when a sample would leave [-1, 1].
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Mixture> {
    if clean.sample_rate_hz != noise.sample_rate_hz {
        return Err(Error::InvalidArgument(format!(
            "sample rate mismatch: clean {} Hz vs noise {} Hz",
            clean.sample_rate_hz, noise.sample_rate_hz
        )));
    }
    let p_clean = clean.power();
    if p_clean <= 0.0 {
        return Err(Error::ZeroPower("clean signal".into()));
    }
    if noise.power() <= 0.0 {
        return Err(Error::ZeroPower("noise signal".into()));
    }

    // Loop or crop the noise to the clean length, then measure its power over
    // exactly the material that enters the mixture.
    let n = clean.samples.len();
    let fitted: Vec<f64> = (0..n)
        .map(|i| noise.samples[i % noise.samples.len()])
        .collect();
    let p_noise = fitted.iter().map(|s| s * s).sum::<f64>() / n as f64;
    if p_noise <= 0.0 {
        return Err(Error::ZeroPower(
            "noise segment overlapping the clean signal".into(),
        ));
    }

    // 10*log10(p_clean / (gain^2 * p_noise)) = snr_db
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut samples: Vec<f64> = clean
        .samples
        .iter()
        .zip(&fitted)
        .map(|(c, v)| c + gain * v)
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let peak_scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if peak_scale < 1.0 {
        for s in &mut samples {
            *s *= peak_scale;
        }
    }
    Ok(Mixture {
        wave: Waveform {
            samples,
            sample_rate_hz: clean.sample_rate_hz,
        },
        noise_gain: gain,
        peak_scale,
    })
}

/// Re-measure the SNR of a mixture given the clean source it was built from.
/// Used by tests and manifest audits.
pub fn measure_snr_db(mixture: &Waveform, clean: &Waveform, peak_scale: f64) -> f64 {
    let n = mixture.samples.len().min(clean.samples.len());
    let mut p_clean = 0.0;
    let mut p_noise = 0.0;
    for i in 0..n {
        let c = clean.samples[i] * peak_scale;
        let r = mixture.samples[i] - c;
        p_clean += c * c;
        p_noise += r * r;
    }
    10.0 * (p_clean / p_noise).log10()
}
