//! The four-stage schedule and the four comparison systems built from it.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array2, ArrayD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::nn::{Adam, Lifted};
use crate::autograd::tape::{Tape, Var};
use crate::corpus::{BatchSampler, FeatureStore, PairedManifest, SpeakerAttribute};
use crate::error::{Error, Result};
use crate::losses::{
    adversarial_losses, autovc_loss, classification_losses, combine_discriminator_loss,
    combine_generator_loss, cycle_loss, gradient_penalty, identity_loss,
};
use crate::models::autovc::autovc_forward;
use crate::models::se::{se_forward, se_loss};
use crate::models::{generator_forward, ModelProfile};

use super::checkpoint::{Checkpoint, StageTag};
use super::config::TrainConfig;
use super::log::TrainingLog;

/// The comparison systems of the study.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Conversion model trained on clean speech, applied to noisy input raw.
    Autovc,
    /// Independently trained enhancer and converter, cascaded.
    SeVc,
    /// Jointly trained cascade (stages 2-3).
    JtSeVc,
    /// Joint cascade refined adversarially (stages 2-4).
    Estargan,
}

pub const ALL_VARIANTS: [Variant; 4] = [
    Variant::Autovc,
    Variant::SeVc,
    Variant::JtSeVc,
    Variant::Estargan,
];

impl Variant {
    pub fn from_name(name: &str) -> Result<Variant> {
        Ok(match name {
            "autovc" => Variant::Autovc,
            "se_vc" => Variant::SeVc,
            "jt_se_vc" => Variant::JtSeVc,
            "estargan" => Variant::Estargan,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown variant '{name}' (expected autovc, se_vc, jt_se_vc, or estargan)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Autovc => "autovc",
            Variant::SeVc => "se_vc",
            Variant::JtSeVc => "jt_se_vc",
            Variant::Estargan => "estargan",
        }
    }
}

fn mean_vars(tape: &mut Tape, terms: &[Var]) -> Var {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t);
    }
    tape.scale(acc, 1.0 / terms.len() as f64)
}

fn grad_arrays(tape: &mut Tape, loss: Var, wrt: &Lifted) -> Vec<ArrayD<f64>> {
    let gv = tape.grad(loss, &wrt.vars);
    gv.into_iter().map(|g| tape.value(g).to_owned()).collect()
}

fn check_stage_inputs(cfg: &TrainConfig, manifest: &PairedManifest) -> Result<()> {
    cfg.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::Manifest("training manifest is empty".into()));
    }
    Ok(())
}

/// Stage 2: pretrain the enhancer on noisy -> clean pairs.
pub fn stage_pretrain_se(
    cfg: &TrainConfig,
    manifest: &PairedManifest,
    fs: &mut FeatureStore,
) -> Result<(Checkpoint, TrainingLog)> {
    check_stage_inputs(cfg, manifest)?;
    let p = cfg.profile.model_profile();
    let mut ck = Checkpoint::init(cfg, manifest.n_speakers);
    let mut se = ck.se.take().expect("init always has SE params");
    let mut sampler = BatchSampler::new(
        manifest,
        fs,
        cfg.crop_frames,
        cfg.batch_size,
        cfg.seed ^ 0x5e57a9e2,
    )?;
    let mut opt = Adam::new(&se, cfg.lr_generator);
    let mut log = TrainingLog::new();

    for step in 0..cfg.stage2_steps {
        let t0 = Instant::now();
        let batch = sampler.next_batch(fs)?;
        let mut tape = Tape::new();
        let l = se.lift(&mut tape);
        let mut terms = Vec::with_capacity(batch.noisy.len());
        for (noisy, clean) in batch.noisy.iter().zip(&batch.clean) {
            let x = tape.leaf(noisy.clone().into_dyn());
            let y = tape.leaf(clean.clone().into_dyn());
            let e = se_forward(&mut tape, &l, &p, x);
            terms.push(se_loss(&mut tape, e, y)?);
        }
        let loss = mean_vars(&mut tape, &terms);
        let value = tape.scalar_value(loss);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("se_loss diverged at step {step}")));
        }
        let grads = grad_arrays(&mut tape, loss, &l);
        opt.step(&mut se, &grads);
        log.push(
            "se_pretrain",
            step as u64,
            BTreeMap::from([("se_loss".to_string(), value)]),
            t0.elapsed().as_millis() as u64,
        );
    }
    ck.se = Some(se);
    ck.stage = StageTag::SePretrained;
    ck.step = cfg.stage2_steps as u64;
    Ok((ck, log))
}

/// Stage 3: joint training of the cascade under the Eq. (5) autoencoder
/// objective; gradients reach the enhancer. Produces the jt-SE+VC system.
pub fn stage_joint_se_vc(
    cfg: &TrainConfig,
    manifest: &PairedManifest,
    fs: &mut FeatureStore,
    warm: &Checkpoint,
) -> Result<(Checkpoint, TrainingLog)> {
    check_stage_inputs(cfg, manifest)?;
    warm.verify_config(cfg)?;
    if warm.se.is_none() || warm.stage != StageTag::SePretrained {
        return Err(Error::Checkpoint(format!(
            "joint stage needs a stage-2 checkpoint with SE parameters, got stage '{}'",
            warm.stage.name()
        )));
    }
    let p = cfg.profile.model_profile();
    let mut ck = warm.clone();
    let mut se = ck.se.take().unwrap();
    let mut vc = ck.vc.clone();
    let mut sampler = BatchSampler::new(
        manifest,
        fs,
        cfg.crop_frames,
        cfg.batch_size,
        cfg.seed ^ 0x301f7a11,
    )?;
    let mut opt_se = Adam::new(&se, cfg.lr_generator);
    let mut opt_vc = Adam::new(&vc, cfg.lr_generator);
    let mut log = TrainingLog::new();

    for step in 0..cfg.stage3_steps {
        let t0 = Instant::now();
        let batch = sampler.next_batch(fs)?;
        let mut tape = Tape::new();
        let se_l = se.lift(&mut tape);
        let vc_l = vc.lift(&mut tape);
        let mut terms = Vec::with_capacity(batch.noisy.len());
        for (noisy, &src) in batch.noisy.iter().zip(&batch.src) {
            let x = tape.leaf(noisy.clone().into_dyn());
            let y_hat = se_forward(&mut tape, &se_l, &p, x);
            let a = SpeakerAttribute::new(src, ck.k)?;
            terms.push(autovc_loss(
                &mut tape,
                &vc_l,
                &p,
                y_hat,
                &a,
                cfg.lambdas.auto,
            )?);
        }
        let loss = mean_vars(&mut tape, &terms);
        let value = tape.scalar_value(loss);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "autovc_loss diverged at step {step}"
            )));
        }
        let g_se = grad_arrays(&mut tape, loss, &se_l);
        let g_vc = grad_arrays(&mut tape, loss, &vc_l);
        opt_se.step(&mut se, &g_se);
        opt_vc.step(&mut vc, &g_vc);
        log.push(
            "joint_se_vc",
            step as u64,
            BTreeMap::from([("autovc_loss".to_string(), value)]),
            t0.elapsed().as_millis() as u64,
        );
    }
    ck.se = Some(se);
    ck.vc = vc;
    ck.stage = StageTag::Joint;
    ck.step += cfg.stage3_steps as u64;
    Ok((ck, log))
}

/// Train the conversion model alone on clean speech (Eq. (5) with the clean
/// log-mel standing in for the enhanced one).
pub fn train_clean_autovc(
    cfg: &TrainConfig,
    manifest: &PairedManifest,
    fs: &mut FeatureStore,
) -> Result<(Checkpoint, TrainingLog)> {
    check_stage_inputs(cfg, manifest)?;
    let p = cfg.profile.model_profile();
    let mut ck = Checkpoint::init(cfg, manifest.n_speakers);
    let mut vc = ck.vc.clone();
    let mut sampler = BatchSampler::new(
        manifest,
        fs,
        cfg.crop_frames,
        cfg.batch_size,
        cfg.seed ^ 0xc1ea9a07,
    )?;
    let mut opt = Adam::new(&vc, cfg.lr_generator);
    let mut log = TrainingLog::new();

    for step in 0..cfg.stage3_steps {
        let t0 = Instant::now();
        let batch = sampler.next_batch(fs)?;
        let mut tape = Tape::new();
        let vc_l = vc.lift(&mut tape);
        let mut terms = Vec::with_capacity(batch.clean.len());
        for (clean, &src) in batch.clean.iter().zip(&batch.src) {
            let y = tape.leaf(clean.clone().into_dyn());
            let a = SpeakerAttribute::new(src, ck.k)?;
            terms.push(autovc_loss(&mut tape, &vc_l, &p, y, &a, cfg.lambdas.auto)?);
        }
        let loss = mean_vars(&mut tape, &terms);
        let value = tape.scalar_value(loss);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "autovc_loss diverged at step {step}"
            )));
        }
        let grads = grad_arrays(&mut tape, loss, &vc_l);
        opt.step(&mut vc, &grads);
        log.push(
            "clean_autovc",
            step as u64,
            BTreeMap::from([("autovc_loss".to_string(), value)]),
            t0.elapsed().as_millis() as u64,
        );
    }
    ck.vc = vc;
    ck.stage = StageTag::CleanAutovc;
    ck.step = cfg.stage3_steps as u64;
    Ok((ck, log))
}

/// One real example per batch item: a clean crop of the item's sampled
/// target speaker (falling back to the item's own clean crop).
fn real_examples(
    sampler: &mut BatchSampler,
    fs: &mut FeatureStore,
    batch: &crate::corpus::TrainingBatch,
    k: usize,
) -> Result<Vec<(Array2<f64>, SpeakerAttribute)>> {
    let mut out = Vec::with_capacity(batch.tgt.len());
    for (i, &tgt) in batch.tgt.iter().enumerate() {
        match sampler.clean_crop_of_speaker(fs, tgt)? {
            Some(crop) => out.push((crop, SpeakerAttribute::new(tgt, k)?)),
            None => out.push((
                batch.clean[i].clone(),
                SpeakerAttribute::new(batch.src[i], k)?,
            )),
        }
    }
    Ok(out)
}

/// Stage 4: the enhancer is frozen; the discriminator, classifier, and
/// converter alternate one update each per step under Eq. (6). Produces the
/// EStarGAN system.
pub fn stage_gan(
    cfg: &TrainConfig,
    manifest: &PairedManifest,
    fs: &mut FeatureStore,
    warm: &Checkpoint,
) -> Result<(Checkpoint, TrainingLog)> {
    check_stage_inputs(cfg, manifest)?;
    warm.verify_config(cfg)?;
    if warm.stage != StageTag::Joint {
        return Err(Error::Checkpoint(format!(
            "adversarial stage needs the stage-3 (joint) checkpoint, got stage '{}'",
            warm.stage.name()
        )));
    }
    let p = cfg.profile.model_profile();
    let k = warm.k;
    let mut ck = warm.clone();
    let se = ck.se.clone().expect("joint checkpoint carries SE params");
    let mut vc = ck.vc.clone();
    let mut disc = ck.disc.clone();
    let mut cls = ck.cls.clone();
    let mut sampler = BatchSampler::new(
        manifest,
        fs,
        cfg.crop_frames,
        cfg.batch_size,
        cfg.seed ^ 0x6a4e0001,
    )?;
    let mut gp_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6b00_0002);
    let mut opt_g = Adam::new(&vc, cfg.lr_generator);
    let mut opt_d = Adam::new(&disc, cfg.lr_discriminator);
    let mut opt_c = Adam::new(&cls, cfg.lr_classifier);
    let mut log = TrainingLog::new();
    let lam = cfg.lambdas;

    for step in 0..cfg.stage4_steps {
        let t0 = Instant::now();
        let batch = sampler.next_batch(fs)?;
        let n = batch.noisy.len();
        let reals = real_examples(&mut sampler, fs, &batch, k)?;
        let tgt_attrs: Vec<SpeakerAttribute> = batch
            .tgt
            .iter()
            .map(|&t| SpeakerAttribute::new(t, k))
            .collect::<Result<_>>()?;
        let src_attrs: Vec<SpeakerAttribute> = batch
            .src
            .iter()
            .map(|&s| SpeakerAttribute::new(s, k))
            .collect::<Result<_>>()?;

        // Detached fakes for the two critic updates.
        let fake_arrays: Vec<ArrayD<f64>> = {
            let mut tape = Tape::new();
            let se_l = se.lift(&mut tape);
            let vc_l = vc.lift(&mut tape);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let x = tape.leaf(batch.noisy[i].clone().into_dyn());
                let f = generator_forward(
                    &mut tape,
                    &se_l,
                    &vc_l,
                    &p,
                    x,
                    &src_attrs[i],
                    &tgt_attrs[i],
                )?;
                out.push(tape.value(f).to_owned());
            }
            out
        };
        let real_arrays: Vec<ArrayD<f64>> =
            reals.iter().map(|(c, _)| c.clone().into_dyn()).collect();

        // Discriminator update: L_D = L_adv_D + lambda_gp * L_gp.
        let (l_d, l_adv_d, l_gp) = {
            let mut tape = Tape::new();
            let d_l = disc.lift(&mut tape);
            let real_pairs: Vec<(Var, SpeakerAttribute)> = reals
                .iter()
                .map(|(c, a)| (tape.leaf(c.clone().into_dyn()), *a))
                .collect();
            let fake_pairs: Vec<(Var, SpeakerAttribute)> = fake_arrays
                .iter()
                .zip(&tgt_attrs)
                .map(|(f, a)| (tape.leaf(f.clone()), *a))
                .collect();
            let (adv_d, _) = adversarial_losses(&mut tape, &d_l, &p, &real_pairs, &fake_pairs)?;
            let gp = gradient_penalty(
                &mut tape,
                &d_l,
                &p,
                &real_arrays,
                &fake_arrays,
                &tgt_attrs,
                &mut gp_rng,
            )?;
            let l_d = combine_discriminator_loss(&mut tape, adv_d, gp, &lam);
            let grads = grad_arrays(&mut tape, l_d, &d_l);
            opt_d.step(&mut disc, &grads);
            (
                tape.scalar_value(l_d),
                tape.scalar_value(adv_d),
                tape.scalar_value(gp),
            )
        };

        // Classifier update: L_C = L_cls_C on real speech.
        let l_c = {
            let mut tape = Tape::new();
            let c_l = cls.lift(&mut tape);
            let real_pairs: Vec<(Var, SpeakerAttribute)> = reals
                .iter()
                .map(|(c, a)| (tape.leaf(c.clone().into_dyn()), *a))
                .collect();
            let (cls_c, _) = classification_losses(&mut tape, &c_l, &p, &real_pairs, &real_pairs)?;
            let grads = grad_arrays(&mut tape, cls_c, &c_l);
            opt_c.step(&mut cls, &grads);
            tape.scalar_value(cls_c)
        };

        // Generator update: L_F per Eq. (6); SE lifted but never stepped.
        let (l_f, l_adv_f, l_cls_f, l_cyc, l_idm) = {
            let mut tape = Tape::new();
            let se_l = se.lift(&mut tape);
            let vc_l = vc.lift(&mut tape);
            let d_l = disc.lift(&mut tape);
            let c_l = cls.lift(&mut tape);
            let mut fake_pairs = Vec::with_capacity(n);
            let mut cyc_terms = Vec::with_capacity(n);
            let mut idm_terms = Vec::with_capacity(n);
            for i in 0..n {
                let x = tape.leaf(batch.noisy[i].clone().into_dyn());
                let y = tape.leaf(batch.clean[i].clone().into_dyn());
                let f = generator_forward(
                    &mut tape,
                    &se_l,
                    &vc_l,
                    &p,
                    x,
                    &src_attrs[i],
                    &tgt_attrs[i],
                )?;
                fake_pairs.push((f, tgt_attrs[i]));
                cyc_terms.push(cycle_loss(
                    &mut tape,
                    &se_l,
                    &vc_l,
                    &p,
                    x,
                    y,
                    &src_attrs[i],
                    &tgt_attrs[i],
                )?);
                idm_terms.push(identity_loss(
                    &mut tape,
                    &se_l,
                    &vc_l,
                    &p,
                    x,
                    y,
                    &src_attrs[i],
                )?);
            }
            let real_pairs: Vec<(Var, SpeakerAttribute)> = reals
                .iter()
                .map(|(c, a)| (tape.leaf(c.clone().into_dyn()), *a))
                .collect();
            let (_, adv_f) = adversarial_losses(&mut tape, &d_l, &p, &real_pairs, &fake_pairs)?;
            let (_, cls_f) = classification_losses(&mut tape, &c_l, &p, &real_pairs, &fake_pairs)?;
            let cyc = mean_vars(&mut tape, &cyc_terms);
            let idm = mean_vars(&mut tape, &idm_terms);
            let l_f = combine_generator_loss(&mut tape, adv_f, cls_f, cyc, idm, &lam);
            let grads = grad_arrays(&mut tape, l_f, &vc_l);
            opt_g.step(&mut vc, &grads);
            (
                tape.scalar_value(l_f),
                tape.scalar_value(adv_f),
                tape.scalar_value(cls_f),
                tape.scalar_value(cyc),
                tape.scalar_value(idm),
            )
        };

        for v in [l_d, l_c, l_f] {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "adversarial stage diverged at step {step}"
                )));
            }
        }
        log.push(
            "gan",
            step as u64,
            BTreeMap::from([
                ("l_d".to_string(), l_d),
                ("l_adv_d".to_string(), l_adv_d),
                ("l_gp".to_string(), l_gp),
                ("l_c".to_string(), l_c),
                ("l_f".to_string(), l_f),
                ("l_adv_f".to_string(), l_adv_f),
                ("l_cls_f".to_string(), l_cls_f),
                ("l_cyc".to_string(), l_cyc),
                ("l_idm".to_string(), l_idm),
            ]),
            t0.elapsed().as_millis() as u64,
        );
    }
    ck.se = Some(se);
    ck.vc = vc;
    ck.disc = disc;
    ck.cls = cls;
    ck.stage = StageTag::Gan;
    ck.step += cfg.stage4_steps as u64;
    Ok((ck, log))
}

/// Train one of the four comparison systems from scratch.
pub fn build_variant(
    variant: Variant,
    cfg: &TrainConfig,
    manifest: &PairedManifest,
    fs: &mut FeatureStore,
) -> Result<(Checkpoint, TrainingLog)> {
    match variant {
        Variant::Autovc => {
            let (mut ck, log) = train_clean_autovc(cfg, manifest, fs)?;
            ck.se = None;
            Ok((ck, log))
        }
        Variant::SeVc => {
            let (se_ck, mut log) = stage_pretrain_se(cfg, manifest, fs)?;
            let (mut ck, vc_log) = train_clean_autovc(cfg, manifest, fs)?;
            log.extend(vc_log);
            ck.se = se_ck.se;
            ck.stage = StageTag::Cascade;
            ck.step += se_ck.step;
            Ok((ck, log))
        }
        Variant::JtSeVc => {
            let (warm, mut log) = stage_pretrain_se(cfg, manifest, fs)?;
            let (ck, joint_log) = stage_joint_se_vc(cfg, manifest, fs, &warm)?;
            log.extend(joint_log);
            Ok((ck, log))
        }
        Variant::Estargan => {
            let (warm, mut log) = stage_pretrain_se(cfg, manifest, fs)?;
            let (joint, joint_log) = stage_joint_se_vc(cfg, manifest, fs, &warm)?;
            log.extend(joint_log);
            let (ck, gan_log) = stage_gan(cfg, manifest, fs, &joint)?;
            log.extend(gan_log);
            Ok((ck, log))
        }
    }
}

/// Convert one utterance with a trained checkpoint. Frames are trimmed to a
/// multiple of 16; returns (enhanced, converted) log-mel matrices.
pub fn convert_with(
    ck: &Checkpoint,
    noisy: &Array2<f64>,
    src: usize,
    tgt: usize,
) -> Result<(Option<Array2<f64>>, Array2<f64>)> {
    let p: ModelProfile = ck.profile()?.model_profile();
    let t = (noisy.nrows() / 16) * 16;
    if t == 0 {
        return Err(Error::TooFewFrames {
            got: noisy.nrows(),
            need: 16,
        });
    }
    let src_a = SpeakerAttribute::new(src, ck.k)?;
    let tgt_a = SpeakerAttribute::new(tgt, ck.k)?;
    let trimmed = noisy.slice(ndarray::s![..t, ..]).to_owned();

    let mut tape = Tape::new();
    let x = tape.leaf(trimmed.into_dyn());
    let (enhanced, inp) = match &ck.se {
        Some(se) => {
            let se_l = se.lift(&mut tape);
            let e = se_forward(&mut tape, &se_l, &p, x);
            (Some(e), e)
        }
        None => (None, x),
    };
    let vc_l = ck.vc.lift(&mut tape);
    let (_, hat) = autovc_forward(&mut tape, &vc_l, &p, inp, &src_a, &tgt_a)?;
    let to2 = |tape: &Tape, v: Var| {
        let val = tape.value(v);
        Array2::from_shape_vec(
            (val.shape()[0], val.shape()[1]),
            val.iter().copied().collect(),
        )
        .unwrap()
    };
    let enhanced2 = enhanced.map(|e| to2(&tape, e));
    let hat2 = to2(&tape, hat);
    if hat2.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "conversion produced non-finite output".into(),
        ));
    }
    Ok((enhanced2, hat2))
}
