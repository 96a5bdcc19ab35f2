//! Variant evaluation over a test manifest and table-shaped reporting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureStore, Gender, ManifestEntry, PairedManifest};
use crate::error::{Error, Result};
use crate::signal::Provenance;
use crate::trainer::{convert_with, Checkpoint};

use super::cepstra::{mel_cepstra, CEPSTRUM_ORDER};
use super::mcd::mcd;

/// Full-scale averaged-MCD values reported by the original study, kept as
/// non-binding context in rendered reports.
pub const PUBLISHED_AVG_MCD_DB: [(&str, f64); 4] = [
    ("autovc", 9.66),
    ("se_vc", 9.62),
    ("jt_se_vc", 8.05),
    ("estargan", 7.85),
];

pub fn direction_label(src: Gender, tgt: Gender) -> &'static str {
    match (src, tgt) {
        (Gender::Male, Gender::Male) => "M2M",
        (Gender::Female, Gender::Female) => "F2F",
        (Gender::Male, Gender::Female) => "M2F",
        (Gender::Female, Gender::Male) => "F2M",
    }
}

/// One converted utterance scored against its parallel clean target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResult {
    pub utterance_id: String,
    pub text_id: String,
    pub src_speaker: usize,
    pub tgt_speaker: usize,
    pub direction: String,
    pub noise_name: String,
    pub snr_db: f64,
    pub mcd_db: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub order: usize,
    pub pairs: Vec<PairResult>,
}

impl EvalReport {
    pub fn overall_mean(&self) -> f64 {
        let n = self.pairs.len().max(1) as f64;
        self.pairs.iter().map(|p| p.mcd_db).sum::<f64>() / n
    }

    fn mean_by(&self, key: impl Fn(&PairResult) -> String) -> BTreeMap<String, (f64, usize)> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for p in &self.pairs {
            let e = sums.entry(key(p)).or_insert((0.0, 0));
            e.0 += p.mcd_db;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(k, (s, n))| (k, (s / n as f64, n)))
            .collect()
    }

    /// Mean MCD and pair count per conversion direction (M2M, F2F, M2F, F2M).
    pub fn by_direction(&self) -> BTreeMap<String, (f64, usize)> {
        self.mean_by(|p| p.direction.clone())
    }

    /// Mean MCD and pair count per noise type.
    pub fn by_noise(&self) -> BTreeMap<String, (f64, usize)> {
        self.mean_by(|p| p.noise_name.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fixed-width comparison tables: variants x gender directions, then
/// variants x noise types, each with an Avg column.
pub fn render_comparison(reports: &[&EvalReport]) -> String {
    let directions = ["M2M", "F2F", "M2F", "F2M"];
    let noises: BTreeSet<String> = reports
        .iter()
        .flat_map(|r| r.pairs.iter().map(|p| p.noise_name.clone()))
        .collect();

    let cell = |v: Option<&(f64, usize)>| match v {
        Some((m, _)) => format!("{m:>8.3}"),
        None => format!("{:>8}", "-"),
    };

    let mut out = String::new();
    let _ = writeln!(out, "Averaged MCD (dB) by conversion direction");
    let _ = write!(out, "{:<12}", "variant");
    for d in directions {
        let _ = write!(out, "{d:>8}");
    }
    let _ = writeln!(out, "{:>8}", "Avg");
    for r in reports {
        let by_dir = r.by_direction();
        let _ = write!(out, "{:<12}", r.variant);
        for d in directions {
            let _ = write!(out, "{}", cell(by_dir.get(d)));
        }
        let _ = writeln!(out, "{:>8.3}", r.overall_mean());
    }

    let _ = writeln!(out, "\nAveraged MCD (dB) by noise type");
    let _ = write!(out, "{:<12}", "variant");
    for n in &noises {
        let _ = write!(out, "{n:>8}");
    }
    let _ = writeln!(out, "{:>8}", "Avg");
    for r in reports {
        let by_noise = r.by_noise();
        let _ = write!(out, "{:<12}", r.variant);
        for n in &noises {
            let _ = write!(out, "{}", cell(by_noise.get(n)));
        }
        let _ = writeln!(out, "{:>8.3}", r.overall_mean());
    }

    let _ = write!(
        out,
        "\nPublished full-scale averages (context only, non-binding):"
    );
    for (name, v) in PUBLISHED_AVG_MCD_DB {
        let _ = write!(out, " {name}={v:.2}");
    }
    let _ = writeln!(out);
    out
}

fn evaluate_inner(
    manifest: &PairedManifest,
    fs_store: &mut FeatureStore,
    variant: &str,
    ck: Option<&Checkpoint>,
) -> Result<EvalReport> {
    if let Some(ck) = ck {
        if ck.k != manifest.n_speakers {
            return Err(Error::Eval(format!(
                "checkpoint trained for {} speakers, manifest has {}",
                ck.k, manifest.n_speakers
            )));
        }
    }
    let mut by_key: HashMap<(usize, &str), &ManifestEntry> = HashMap::new();
    let mut genders: HashMap<usize, Gender> = HashMap::new();
    for e in &manifest.entries {
        if let Some(text) = e.record.text_id.as_deref() {
            by_key.insert((e.record.speaker_index, text), e);
        }
        genders.insert(e.record.speaker_index, e.record.gender);
    }

    let mut pairs = Vec::new();
    for e in &manifest.entries {
        let src = e.record.speaker_index;
        let text = e
            .record
            .text_id
            .as_deref()
            .ok_or_else(|| Error::Eval(format!("{} has no text id", e.record.utterance_id)))?;
        for tgt in 0..manifest.n_speakers {
            if tgt == src {
                continue;
            }
            let tgt_entry = *by_key.get(&(tgt, text)).ok_or_else(|| {
                Error::Eval(format!(
                    "missing parallel target: speaker {tgt} has no rendition of {text}"
                ))
            })?;
            let tgt_gender = *genders
                .get(&tgt)
                .ok_or_else(|| Error::Eval(format!("speaker {tgt} absent from manifest")))?;
            let tgt_clean = fs_store.get(&tgt_entry.record.clean_path, Provenance::Clean)?;
            let ref_cep = mel_cepstra(&tgt_clean, CEPSTRUM_ORDER)?;
            for r in &e.renditions {
                let noisy = fs_store.get(&r.noisy_path, Provenance::Noisy)?;
                let converted = match ck {
                    Some(ck) => convert_with(ck, &noisy, src, tgt)?.1,
                    None => noisy.as_ref().clone(),
                };
                let cep = mel_cepstra(&converted, CEPSTRUM_ORDER)?;
                pairs.push(PairResult {
                    utterance_id: e.record.utterance_id.clone(),
                    text_id: text.to_string(),
                    src_speaker: src,
                    tgt_speaker: tgt,
                    direction: direction_label(e.record.gender, tgt_gender).to_string(),
                    noise_name: r.noise_name.clone(),
                    snr_db: r.snr_db,
                    mcd_db: mcd(&cep, &ref_cep)?,
                });
            }
        }
    }
    Ok(EvalReport {
        variant: variant.to_string(),
        order: CEPSTRUM_ORDER,
        pairs,
    })
}

/// Convert every noisy test utterance to every other speaker and score the
/// result against the target speaker's clean rendition of the same sentence.
pub fn evaluate_variant(
    ck: &Checkpoint,
    manifest: &PairedManifest,
    fs_store: &mut FeatureStore,
    variant: &str,
) -> Result<EvalReport> {
    evaluate_inner(manifest, fs_store, variant, Some(ck))
}

/// Same pair set, but scores the unprocessed noisy source against each target.
pub fn evaluate_noisy_baseline(
    manifest: &PairedManifest,
    fs_store: &mut FeatureStore,
) -> Result<EvalReport> {
    evaluate_inner(manifest, fs_store, "noisy", None)
}
