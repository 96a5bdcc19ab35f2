//! RIFF/WAVE reader and writer for PCM16 and 32-bit float files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Waveform, SAMPLE_RATE};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Load a WAV file as mono audio scaled to [-1, 1]. Multi-channel files keep
/// the first channel. When `resample` is set the audio is converted to the
/// canonical 16 kHz rate; otherwise a differing rate is an error.
pub fn load_wav(path: &Path, resample: bool) -> Result<Waveform> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (samples, rate) = parse_wav(&bytes, path)?;
    if samples.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    let wave = Waveform::new(samples, rate)?;
    if wave.sample_rate_hz == SAMPLE_RATE {
        Ok(wave)
    } else if resample {
        Ok(resample_linear(&wave, SAMPLE_RATE))
    } else {
        Err(Error::SampleRateMismatch {
            got: wave.sample_rate_hz,
            want: SAMPLE_RATE,
        })
    }
}

fn parse_wav(bytes: &[u8], path: &Path) -> Result<(Vec<f64>, u32)> {
    let bad = |m: &str| Error::UnsupportedWav(format!("{}: {m}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos += 8 + size + (size & 1); // chunks are word-aligned
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    if channels == 0 {
        return Err(bad("zero channels"));
    }
    let ch = channels as usize;
    let samples = match (format, bits) {
        (1, 16) => {
            let frame = 2 * ch;
            data.chunks_exact(frame)
                .map(|f| i16::from_le_bytes(f[0..2].try_into().unwrap()) as f64 / 32768.0)
                .collect()
        }
        (3, 32) => {
            let frame = 4 * ch;
            data.chunks_exact(frame)
                .map(|f| f32::from_le_bytes(f[0..4].try_into().unwrap()) as f64)
                .collect()
        }
        (f, b) => return Err(bad(&format!("format tag {f} with {b} bits not supported"))),
    };
    Ok((samples, rate))
}

/// Write mono audio to a WAV file.
pub fn write_wav(path: &Path, wave: &Waveform, encoding: WavEncoding) -> Result<()> {
    let n = wave.samples.len();
    let (format_tag, bits, data_len): (u16, u16, usize) = match encoding {
        WavEncoding::Pcm16 => (1, 16, 2 * n),
        WavEncoding::Float32 => (3, 32, 4 * n),
    };
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&wave.sample_rate_hz.to_le_bytes());
    let byte_rate = wave.sample_rate_hz * bits as u32 / 8;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bits / 8).to_le_bytes()); // block align (mono)
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &wave.samples {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in &wave.samples {
                out.extend_from_slice(&(s as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Linear-interpolation resampler. Adequate for the synthetic corpus; not a
/// polyphase design.
fn resample_linear(wave: &Waveform, target_rate: u32) -> Waveform {
    let ratio = target_rate as f64 / wave.sample_rate_hz as f64;
    let out_len = ((wave.samples.len() as f64) * ratio).round() as usize;
    let out_len = out_len.max(1);
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let src = i as f64 / ratio;
        let i0 = src.floor() as usize;
        let frac = src - i0 as f64;
        let a = wave.samples.get(i0).copied().unwrap_or(0.0);
        let b = wave.samples.get(i0 + 1).copied().unwrap_or(a);
        out.push(a + frac * (b - a));
    }
    Waveform {
        samples: out,
        sample_rate_hz: target_rate,
    }
}
