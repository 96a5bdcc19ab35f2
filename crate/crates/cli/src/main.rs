//! `sevc`: pipeline driver for corpus synthesis, training, conversion,
//! evaluation, and plotting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sevc_core::corpus::{
    ensure_disjoint, make_toy_corpus, noise, split_by_sentence, FeatureStore, PairedManifest,
    DEFAULT_TEST_NOISES, DEFAULT_TRAIN_NOISES,
};
use sevc_core::error::{Error, Result};
use sevc_core::eval::{
    evaluate_noisy_baseline, evaluate_variant, export_panels, export_spectrogram,
    render_comparison, EvalReport,
};
use sevc_core::signal::{
    invert_log_mel, load_wav, log_mel, write_wav, LogMelSpectrogram, MelFilterbank, Provenance,
    WavEncoding, Waveform, SAMPLE_RATE,
};
use sevc_core::trainer::{
    load_checkpoint, save_checkpoint, stage_gan, stage_joint_se_vc, stage_pretrain_se,
    train_clean_autovc, Checkpoint, StageTag, TrainConfig, TrainingLog, Variant,
};

const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 65;
const EXIT_MISSING: u8 = 66;
const EXIT_NUMERIC: u8 = 70;

#[derive(Parser)]
#[command(
    name = "sevc",
    version,
    about = "Speech-enhancement-assisted voice conversion pipeline"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file of training-config overrides (default: $SEVC_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Validate configuration and inputs without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the toy corpus, mix noises, and write split manifests.
    MakeCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        speakers: usize,
        #[arg(long, default_value_t = 6)]
        sentences: usize,
        /// Sentences held out into the test split.
        #[arg(long, default_value_t = 2)]
        test_sentences: usize,
        /// Mixing SNRs in dB, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15")]
        snrs: Vec<f64>,
    },
    /// Train one comparison variant; writes checkpoint and loss log.
    Train {
        #[arg(long)]
        variant: String,
        /// Corpus directory produced by make-corpus (reads train.jsonl).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Build missing prerequisite stage checkpoints instead of failing.
        #[arg(long)]
        auto_stages: bool,
    },
    /// Convert one utterance to a target speaker.
    Convert {
        #[arg(long)]
        src_wav: PathBuf,
        #[arg(long)]
        src_speaker: usize,
        #[arg(long)]
        tgt_speaker: usize,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output path for the converted log-mel spectrogram (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Optional Griffin-Lim waveform output path.
        #[arg(long)]
        wav: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        gl_iters: usize,
    },
    /// Score a checkpoint on a test manifest.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output path for the report (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Variant label recorded in the report (default: from the checkpoint).
        #[arg(long)]
        variant: Option<String>,
        /// Also write an unconverted noisy-source baseline report next to it.
        #[arg(long)]
        with_baseline: bool,
    },
    /// Render spectrogram heatmaps from wav files (several wavs = panel grid).
    Plot {
        #[arg(long = "wav", required = true)]
        wavs: Vec<PathBuf>,
        /// Panel titles, one per wav (default: file stems).
        #[arg(long = "label")]
        labels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine evaluation reports into comparison tables.
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Converted-feature file format for `convert`.
#[derive(Serialize, Deserialize)]
struct LmsFile {
    n_frames: usize,
    n_mels: usize,
    /// Row-major frame data.
    data: Vec<f64>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_MISSING,
        Error::Numerical(_) | Error::ZeroPower(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Overlay a partial JSON config onto the defaults; unknown keys are errors.
fn merge_config(
    base: &mut serde_json::Value,
    overlay: &serde_json::Value,
    path: &str,
) -> Result<()> {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (key, val) in o {
                let child = b.get_mut(key).ok_or_else(|| {
                    Error::InvalidArgument(format!("unknown config field {path}{key}"))
                })?;
                merge_config(child, val, &format!("{path}{key}."))?;
            }
            Ok(())
        }
        (b, o) => {
            *b = o.clone();
            Ok(())
        }
    }
}

fn load_config(common: &Common) -> Result<TrainConfig> {
    let mut value = serde_json::to_value(TrainConfig::default())?;
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os("SEVC_CONFIG").map(PathBuf::from));
    if let Some(p) = path {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let overlay: serde_json::Value = serde_json::from_str(&text)?;
        merge_config(&mut value, &overlay, "")?;
    }
    let mut cfg: TrainConfig = serde_json::from_value(value)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_manifest(path: &Path) -> Result<PairedManifest> {
    let manifest = PairedManifest::load(path)?;
    manifest.validate_files()?;
    Ok(manifest)
}

fn push(artifacts: &mut Vec<String>, path: &Path) {
    artifacts.push(path.display().to_string());
}

fn save_stage(
    ck: &Checkpoint,
    log: &TrainingLog,
    dir: &Path,
    name: &str,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    let ck_path = dir.join(format!("{name}.ck"));
    save_checkpoint(ck, &ck_path)?;
    push(artifacts, &ck_path);
    let log_path = dir.join(format!("{name}.log.jsonl"));
    log.save(&log_path)?;
    push(artifacts, &log_path);
    Ok(())
}

/// Load a prerequisite stage checkpoint, or build it when --auto-stages; a
/// missing prerequisite without --auto-stages is a configuration error that
/// names the stage.
fn obtain_stage(
    dir: &Path,
    name: &str,
    stage: StageTag,
    description: &str,
    producer: &str,
    auto: bool,
    cfg: &TrainConfig,
    build: impl FnOnce() -> Result<(Checkpoint, TrainingLog)>,
    artifacts: &mut Vec<String>,
) -> Result<Checkpoint> {
    let path = dir.join(format!("{name}.ck"));
    if path.exists() {
        let ck = load_checkpoint(&path)?;
        ck.verify_config(cfg)?;
        if ck.stage != stage {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} checkpoint, expected {}",
                path.display(),
                ck.stage.name(),
                stage.name()
            )));
        }
        return Ok(ck);
    }
    if !auto {
        return Err(Error::InvalidArgument(format!(
            "missing {description} checkpoint at {}; run `sevc train --variant {producer}` first or pass --auto-stages",
            path.display()
        )));
    }
    let (ck, log) = build()?;
    save_stage(&ck, &log, dir, name, artifacts)?;
    Ok(ck)
}

fn cmd_make_corpus(
    cfg: &TrainConfig,
    dry_run: bool,
    out: &Path,
    speakers: usize,
    sentences: usize,
    test_sentences: usize,
    snrs: &[f64],
) -> Result<Vec<String>> {
    if speakers < 2 {
        return Err(Error::InvalidArgument("need at least 2 speakers".into()));
    }
    if test_sentences == 0 || test_sentences >= sentences {
        return Err(Error::InvalidArgument(format!(
            "test_sentences {test_sentences} must be in 1..{sentences}"
        )));
    }
    if snrs.is_empty() || snrs.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "snrs must be finite and nonempty".into(),
        ));
    }
    if dry_run {
        return Ok(Vec::new());
    }

    let clean = make_toy_corpus(&out.join("clean"), speakers, sentences, cfg.seed)?;
    let (train_clean, test_clean) = split_by_sentence(&clean, test_sentences, sentences)?;

    let render = |kinds: &[noise::NoiseKind]| -> Vec<(String, Waveform)> {
        kinds
            .iter()
            .map(|k| {
                (
                    k.name().to_string(),
                    noise::generate(*k, SAMPLE_RATE as usize, cfg.seed),
                )
            })
            .collect()
    };
    let train = synth_split(
        &train_clean,
        &render(&DEFAULT_TRAIN_NOISES),
        snrs,
        &out.join("noisy-train"),
    )?;
    let test = synth_split(
        &test_clean,
        &render(&DEFAULT_TEST_NOISES),
        snrs,
        &out.join("noisy-test"),
    )?;
    ensure_disjoint(&train, &test)?;

    let mut artifacts = Vec::new();
    let train_path = out.join("train.jsonl");
    train.save(&train_path)?;
    push(&mut artifacts, &train_path);
    let test_path = out.join("test.jsonl");
    test.save(&test_path)?;
    push(&mut artifacts, &test_path);
    println!(
        "corpus: {} speakers, {} train / {} test utterances",
        speakers,
        train.entries.len(),
        test.entries.len()
    );
    Ok(artifacts)
}

fn synth_split(
    manifest: &PairedManifest,
    noises: &[(String, Waveform)],
    snrs: &[f64],
    dir: &Path,
) -> Result<PairedManifest> {
    sevc_core::corpus::synthesize_noisy(manifest, noises, snrs, dir)
}

fn cmd_train(
    cfg: &TrainConfig,
    dry_run: bool,
    variant: &str,
    corpus: &Path,
    out: &Path,
    auto_stages: bool,
) -> Result<Vec<String>> {
    let variant = Variant::from_name(variant)?;
    let manifest = load_manifest(&corpus.join("train.jsonl"))?;
    let mut artifacts = Vec::new();

    // Prerequisite presence is checked even under --dry-run.
    let stage2_missing = !out.join("stage2_se.ck").exists();
    let joint_missing = !out.join("jt_se_vc.ck").exists();
    if !auto_stages {
        let missing: Option<(&str, &str, &str)> = match variant {
            Variant::Autovc => None,
            Variant::SeVc | Variant::JtSeVc if stage2_missing => {
                Some(("stage-2 SE pretraining", "stage2_se.ck", "jt_se_vc"))
            }
            Variant::Estargan if joint_missing => {
                Some(("stage-3 joint SE+VC", "jt_se_vc.ck", "jt_se_vc"))
            }
            _ => None,
        };
        if let Some((desc, file, producer)) = missing {
            return Err(Error::InvalidArgument(format!(
                "missing {desc} checkpoint at {}; run `sevc train --variant {producer}` first or pass --auto-stages",
                out.join(file).display()
            )));
        }
    }
    if dry_run {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut fs_store = FeatureStore::new();
    match variant {
        Variant::Autovc => {
            let (ck, log) = train_clean_autovc(cfg, &manifest, &mut fs_store)?;
            save_stage(&ck, &log, out, "autovc", &mut artifacts)?;
        }
        Variant::SeVc => {
            let se_ck = obtain_stage(
                out,
                "stage2_se",
                StageTag::SePretrained,
                "stage-2 SE pretraining",
                "jt_se_vc",
                auto_stages,
                cfg,
                || stage_pretrain_se(cfg, &manifest, &mut FeatureStore::new()),
                &mut artifacts,
            )?;
            let av = obtain_stage(
                out,
                "autovc",
                StageTag::CleanAutovc,
                "clean AutoVC",
                "autovc",
                auto_stages,
                cfg,
                || train_clean_autovc(cfg, &manifest, &mut FeatureStore::new()),
                &mut artifacts,
            )?;
            let mut ck = av;
            ck.se = se_ck.se;
            ck.stage = StageTag::Cascade;
            save_stage(&ck, &TrainingLog::new(), out, "se_vc", &mut artifacts)?;
        }
        Variant::JtSeVc => {
            let se_ck = obtain_stage(
                out,
                "stage2_se",
                StageTag::SePretrained,
                "stage-2 SE pretraining",
                "jt_se_vc",
                auto_stages,
                cfg,
                || stage_pretrain_se(cfg, &manifest, &mut FeatureStore::new()),
                &mut artifacts,
            )?;
            let (ck, log) = stage_joint_se_vc(cfg, &manifest, &mut fs_store, &se_ck)?;
            save_stage(&ck, &log, out, "jt_se_vc", &mut artifacts)?;
        }
        Variant::Estargan => {
            let joint = obtain_stage(
                out,
                "jt_se_vc",
                StageTag::Joint,
                "stage-3 joint SE+VC",
                "jt_se_vc",
                auto_stages,
                cfg,
                || {
                    let mut inner = FeatureStore::new();
                    let se_ck = stage_pretrain_se(cfg, &manifest, &mut inner)?.0;
                    stage_joint_se_vc(cfg, &manifest, &mut inner, &se_ck)
                },
                &mut artifacts,
            )?;
            let (ck, log) = stage_gan(cfg, &manifest, &mut fs_store, &joint)?;
            save_stage(&ck, &log, out, "estargan", &mut artifacts)?;
        }
    }
    Ok(artifacts)
}

fn cmd_convert(
    dry_run: bool,
    src_wav: &Path,
    src: usize,
    tgt: usize,
    checkpoint: &Path,
    out: &Path,
    wav_out: Option<&Path>,
    gl_iters: usize,
) -> Result<Vec<String>> {
    let ck = load_checkpoint(checkpoint)?;
    if src >= ck.k || tgt >= ck.k {
        return Err(Error::InvalidArgument(format!(
            "speaker indices {src}->{tgt} out of range for a {}-speaker checkpoint",
            ck.k
        )));
    }
    let wave = load_wav(src_wav, false)?;
    if dry_run {
        return Ok(Vec::new());
    }
    let fb = MelFilterbank::default_for_pipeline();
    let lms = log_mel(&wave, &fb, Provenance::Noisy)?;
    let (_enhanced, converted) = sevc_core::trainer::convert_with(&ck, &lms.frames, src, tgt)?;

    let file = LmsFile {
        n_frames: converted.nrows(),
        n_mels: converted.ncols(),
        data: converted.iter().copied().collect(),
    };
    fs::write(out, serde_json::to_string(&file)?).map_err(|e| Error::io(out, e))?;
    let mut artifacts = Vec::new();
    push(&mut artifacts, out);

    if let Some(wav_path) = wav_out {
        let lms = LogMelSpectrogram::new(converted, Provenance::Converted)?;
        let audio = invert_log_mel(&lms, &fb, gl_iters)?;
        write_wav(wav_path, &audio, WavEncoding::Pcm16)?;
        push(&mut artifacts, wav_path);
    }
    Ok(artifacts)
}

fn variant_label(ck: &Checkpoint) -> &'static str {
    match ck.stage {
        StageTag::CleanAutovc => "autovc",
        StageTag::Cascade => "se_vc",
        StageTag::Joint => "jt_se_vc",
        StageTag::Gan => "estargan",
        StageTag::SePretrained => "se_only",
        StageTag::Init => "untrained",
    }
}

fn cmd_evaluate(
    dry_run: bool,
    checkpoint: &Path,
    manifest_path: &Path,
    out: &Path,
    variant: Option<&str>,
    with_baseline: bool,
) -> Result<Vec<String>> {
    let ck = load_checkpoint(checkpoint)?;
    let manifest = load_manifest(manifest_path)?;
    if dry_run {
        return Ok(Vec::new());
    }
    let label = variant
        .map(str::to_string)
        .unwrap_or_else(|| variant_label(&ck).to_string());
    let mut fs_store = FeatureStore::new();
    let report = evaluate_variant(&ck, &manifest, &mut fs_store, &label)?;
    report.save(out)?;
    let mut artifacts = Vec::new();
    push(&mut artifacts, out);
    println!(
        "{label}: mean MCD {:.3} dB over {} pairs",
        report.overall_mean(),
        report.pairs.len()
    );

    if with_baseline {
        let baseline = evaluate_noisy_baseline(&manifest, &mut fs_store)?;
        let base_path = out.with_extension("baseline.json");
        baseline.save(&base_path)?;
        push(&mut artifacts, &base_path);
        println!("noisy baseline: mean MCD {:.3} dB", baseline.overall_mean());
    }
    Ok(artifacts)
}

fn cmd_plot(dry_run: bool, wavs: &[PathBuf], labels: &[String], out: &Path) -> Result<Vec<String>> {
    if labels.len() > wavs.len() {
        return Err(Error::InvalidArgument("more labels than wav inputs".into()));
    }
    let fb = MelFilterbank::default_for_pipeline();
    let mut panels = Vec::new();
    for (i, path) in wavs.iter().enumerate() {
        let wave = load_wav(path, false)?;
        let lms = log_mel(&wave, &fb, Provenance::Clean)?;
        let title = labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        panels.push((title.to_ascii_uppercase(), lms.frames));
    }
    if dry_run {
        return Ok(Vec::new());
    }
    if panels.len() == 1 {
        export_spectrogram(&panels[0].1, out)?;
    } else {
        let refs: Vec<(String, &ndarray::Array2<f64>)> =
            panels.iter().map(|(t, p)| (t.clone(), p)).collect();
        export_panels(&refs, out)?;
    }
    let mut artifacts = Vec::new();
    push(&mut artifacts, out);
    Ok(artifacts)
}

fn cmd_report(dry_run: bool, inputs: &[PathBuf], out: &Path) -> Result<Vec<String>> {
    let reports: Vec<EvalReport> = inputs
        .iter()
        .map(|p| EvalReport::load(p))
        .collect::<Result<_>>()?;
    if dry_run {
        return Ok(Vec::new());
    }
    let refs: Vec<&EvalReport> = reports.iter().collect();
    let table = render_comparison(&refs);
    fs::write(out, &table).map_err(|e| Error::io(out, e))?;
    print!("{table}");
    Ok(vec![out.display().to_string()])
}

fn run(cli: Cli) -> Result<Vec<String>> {
    let cfg = load_config(&cli.common)?;
    let dry = cli.common.dry_run;
    match &cli.command {
        Command::MakeCorpus {
            out,
            speakers,
            sentences,
            test_sentences,
            snrs,
        } => cmd_make_corpus(&cfg, dry, out, *speakers, *sentences, *test_sentences, snrs),
        Command::Train {
            variant,
            corpus,
            out,
            auto_stages,
        } => cmd_train(&cfg, dry, variant, corpus, out, *auto_stages),
        Command::Convert {
            src_wav,
            src_speaker,
            tgt_speaker,
            checkpoint,
            out,
            wav,
            gl_iters,
        } => cmd_convert(
            dry,
            src_wav,
            *src_speaker,
            *tgt_speaker,
            checkpoint,
            out,
            wav.as_deref(),
            *gl_iters,
        ),
        Command::Evaluate {
            checkpoint,
            manifest,
            out,
            variant,
            with_baseline,
        } => cmd_evaluate(
            dry,
            checkpoint,
            manifest,
            out,
            variant.as_deref(),
            *with_baseline,
        ),
        Command::Plot { wavs, labels, out } => cmd_plot(dry, wavs, labels, out),
        Command::Report { inputs, out } => cmd_report(dry, inputs, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(artifacts) => {
            println!(
                "artifacts\t{}",
                serde_json::to_string(&artifacts).expect("paths serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
