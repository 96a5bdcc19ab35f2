//! Noisy corpus synthesis: every clean utterance crossed with every noise and
//! SNR, written out and registered in the manifest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{load_wav, mix_at_snr, write_wav, WavEncoding, Waveform};

use super::manifest::{NoisyRendition, PairedManifest};

/// Mix every clean utterance with every (noise, SNR) combination. Mixtures go
/// to `<noisy_root>/<noise>/<snr>/<speaker>/<utt>.wav` and are recorded on the
/// returned manifest.
pub fn synthesize_noisy(
    manifest: &PairedManifest,
    noises: &[(String, Waveform)],
    snrs_db: &[f64],
    noisy_root: &Path,
) -> Result<PairedManifest> {
    if noises.is_empty() {
        return Err(Error::InvalidArgument(
            "noise list must not be empty".into(),
        ));
    }
    if snrs_db.is_empty() {
        return Err(Error::InvalidArgument("SNR list must not be empty".into()));
    }
    for (name, wave) in noises {
        if wave.power() <= 0.0 {
            return Err(Error::ZeroPower(format!("noise '{name}'")));
        }
    }
    let mut out = manifest.clone();
    for entry in &mut out.entries {
        let clean = load_wav(&entry.record.clean_path, false)?;
        let speaker = format!("spk{:02}", entry.record.speaker_index);
        let stem = entry
            .record
            .clean_path
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Manifest("clean path has no file name".into()))?;
        for (name, noise) in noises {
            for &snr in snrs_db {
                let dir = noisy_root
                    .join(name)
                    .join(format!("snr{snr:+05.1}"))
                    .join(&speaker);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let mixture = mix_at_snr(&clean, noise, snr)?;
                let path = dir.join(stem);
                write_wav(&path, &mixture.wave, WavEncoding::Float32)?;
                entry.renditions.push(NoisyRendition {
                    noise_name: name.clone(),
                    snr_db: snr,
                    noisy_path: path,
                    peak_scale: mixture.peak_scale,
                });
            }
        }
    }
    Ok(out)
}
