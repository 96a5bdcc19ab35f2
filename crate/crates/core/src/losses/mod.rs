//! Training objectives: the autoencoder reconstruction loss, the adversarial,
//! classification, cycle, and identity terms, and the gradient penalty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ndarray::{ArrayD, IxDyn};

use crate::autograd::nn::{l1, mse, Lifted};
use crate::autograd::tape::{Tape, Var};
use crate::corpus::SpeakerAttribute;
use crate::error::{Error, Result};
use crate::models::adversary::{classify, discriminate, discriminate_score};
use crate::models::autovc::{autovc_forward, encode, generator_forward};
use crate::models::ModelProfile;

/// Floor applied to every probability before a log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Loss weights. The adversarial/classification weights follow common
/// StarGAN-VC practice; none are stated in the source.
#[derive(Copy, Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Lambdas {
    pub auto: f64,
    pub cls: f64,
    pub cyc: f64,
    pub idm: f64,
    pub gp: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas {
            auto: 1.0,
            cls: 1.0,
            cyc: 10.0,
            idm: 5.0,
            gp: 10.0,
        }
    }
}

fn check_same_shape(tape: &Tape, a: Var, b: Var) -> Result<()> {
    let (sa, sb) = (
        tape.value(a).shape().to_vec(),
        tape.value(b).shape().to_vec(),
    );
    if sa != sb {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch {sa:?} vs {sb:?}"
        )));
    }
    Ok(())
}

fn batch_mean(tape: &mut Tape, terms: &[Var]) -> Var {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t);
    }
    tape.scale(acc, 1.0 / terms.len() as f64)
}

fn neg_log(tape: &mut Tape, p: Var) -> Var {
    let c = tape.clamp_min(p, LOG_CLAMP);
    let lp = tape.ln(c);
    tape.neg(lp)
}

/// Eq. (5): L_auto = MSE(t̃_rec, ŷ) + MSE(ŷ_rec, ŷ) + λ_auto · MSE(encode(ŷ_rec), c)
/// where (t̃_rec, ŷ_rec) = F_auto(ŷ, I_s, I_s) and c = encode(ŷ, I_s).
/// Gradient flows through both encode calls.
pub fn autovc_loss(
    tape: &mut Tape,
    vc: &Lifted,
    p: &ModelProfile,
    y_hat: Var,
    src: &SpeakerAttribute,
    lambda_auto: f64,
) -> Result<Var> {
    if lambda_auto < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda_auto {lambda_auto} < 0"
        )));
    }
    let code = encode(tape, vc, p, y_hat, src)?;
    let (tilde_rec, hat_rec) = autovc_forward(tape, vc, p, y_hat, src, src)?;
    let m1 = mse(tape, tilde_rec, y_hat);
    let m2 = mse(tape, hat_rec, y_hat);
    let code_rec = encode(tape, vc, p, hat_rec, src)?;
    let m3 = mse(tape, code_rec, code);
    let recon = tape.add(m1, m2);
    let content = tape.scale(m3, lambda_auto);
    Ok(tape.add(recon, content))
}

/// Eq. (1): returns (L_adv_D, L_adv_F) for batches of (crop, target attr).
pub fn adversarial_losses(
    tape: &mut Tape,
    disc: &Lifted,
    p: &ModelProfile,
    real: &[(Var, SpeakerAttribute)],
    fake: &[(Var, SpeakerAttribute)],
) -> Result<(Var, Var)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::InvalidArgument(
            "adversarial batches must be nonempty".into(),
        ));
    }
    let mut d_real = Vec::new();
    for &(x, a) in real {
        let d = discriminate(tape, disc, p, x, &a)?;
        d_real.push(neg_log(tape, d));
    }
    let mut d_fake = Vec::new();
    let mut f_terms = Vec::new();
    for &(x, a) in fake {
        let d = discriminate(tape, disc, p, x, &a)?;
        let one_minus = {
            let nd = tape.neg(d);
            tape.add_scalar(nd, 1.0)
        };
        d_fake.push(neg_log(tape, one_minus));
        f_terms.push(neg_log(tape, d));
    }
    let real_term = batch_mean(tape, &d_real);
    let fake_term = batch_mean(tape, &d_fake);
    let l_d = tape.add(real_term, fake_term);
    let l_f = batch_mean(tape, &f_terms);
    Ok((l_d, l_f))
}

fn class_nll(
    tape: &mut Tape,
    cls: &Lifted,
    p: &ModelProfile,
    x: Var,
    attr: &SpeakerAttribute,
) -> Result<Var> {
    let probs = classify(tape, cls, p, x, attr.k)?;
    let onehot = tape.leaf(ArrayD::from_shape_vec(IxDyn(&[1, attr.k]), attr.onehot()).unwrap());
    let picked = tape.mul(probs, onehot);
    let prob = tape.sum(picked);
    Ok(neg_log(tape, prob))
}

/// Eq. (2): (L_cls_C on real speech with true attrs, L_cls_F on generated
/// speech with target attrs).
pub fn classification_losses(
    tape: &mut Tape,
    cls: &Lifted,
    p: &ModelProfile,
    real: &[(Var, SpeakerAttribute)],
    fake: &[(Var, SpeakerAttribute)],
) -> Result<(Var, Var)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::InvalidArgument(
            "classification batches must be nonempty".into(),
        ));
    }
    let mut c_terms = Vec::new();
    for &(x, a) in real {
        c_terms.push(class_nll(tape, cls, p, x, &a)?);
    }
    let mut f_terms = Vec::new();
    for &(x, a) in fake {
        f_terms.push(class_nll(tape, cls, p, x, &a)?);
    }
    let l_c = batch_mean(tape, &c_terms);
    let l_f = batch_mean(tape, &f_terms);
    Ok((l_c, l_f))
}

/// Eq. (7) cycle term: ‖F_auto(F(x, I_s, I_t), I_t, I_s) − y‖₁. The forward
/// pass runs the full enhancer+converter; the back-conversion is converter
/// only, and the reference is the clean source.
pub fn cycle_loss(
    tape: &mut Tape,
    se: &Lifted,
    vc: &Lifted,
    p: &ModelProfile,
    noisy: Var,
    clean: Var,
    src: &SpeakerAttribute,
    tgt: &SpeakerAttribute,
) -> Result<Var> {
    check_same_shape(tape, noisy, clean)?;
    let converted = generator_forward(tape, se, vc, p, noisy, src, tgt)?;
    let (_, back) = autovc_forward(tape, vc, p, converted, tgt, src)?;
    Ok(l1(tape, back, clean))
}

/// Eq. (4): ‖F(x, I_s, I_s) − y‖₁, same-speaker conversion of the noisy
/// input against the clean source.
pub fn identity_loss(
    tape: &mut Tape,
    se: &Lifted,
    vc: &Lifted,
    p: &ModelProfile,
    noisy: Var,
    clean: Var,
    src: &SpeakerAttribute,
) -> Result<Var> {
    check_same_shape(tape, noisy, clean)?;
    let same = generator_forward(tape, se, vc, p, noisy, src, src)?;
    Ok(l1(tape, same, clean))
}

/// WGAN-style penalty E[(‖∇_u s(u)‖₂ − 1)²] over per-sample interpolations
/// u = ε·t + (1−ε)·t̂ with a caller-supplied pre-sigmoid scorer.
pub fn gradient_penalty_with<S>(
    tape: &mut Tape,
    real: &[ArrayD<f64>],
    fake: &[ArrayD<f64>],
    rng: &mut ChaCha8Rng,
    mut score: S,
) -> Result<Var>
where
    S: FnMut(&mut Tape, Var) -> Result<Var>,
{
    if real.is_empty() || real.len() != fake.len() {
        return Err(Error::InvalidArgument(
            "penalty batches must be nonempty and equal".into(),
        ));
    }
    let mut terms = Vec::new();
    for (t, t_hat) in real.iter().zip(fake) {
        if t.shape() != t_hat.shape() {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch {:?} vs {:?}",
                t.shape(),
                t_hat.shape()
            )));
        }
        let eps: f64 = rng.gen_range(0.0..1.0);
        let u = tape.leaf(t * eps + t_hat * (1.0 - eps));
        let s = score(tape, u)?;
        let g = tape.grad(s, &[u])[0];
        let g2 = tape.mul(g, g);
        let sum = tape.sum(g2);
        // Tiny offset keeps sqrt differentiable when the input gradient
        // vanishes (constant scorer).
        let safe = tape.add_scalar(sum, 1e-16);
        let norm = tape.sqrt(safe);
        let dev = tape.add_scalar(norm, -1.0);
        terms.push(tape.mul(dev, dev));
    }
    Ok(batch_mean(tape, &terms))
}

/// Penalty for the speech discriminator, interpolating per (real, fake,
/// target attr) triple and scoring with the pre-sigmoid discriminator.
pub fn gradient_penalty(
    tape: &mut Tape,
    disc: &Lifted,
    p: &ModelProfile,
    real: &[ArrayD<f64>],
    fake: &[ArrayD<f64>],
    attrs: &[SpeakerAttribute],
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    if attrs.len() != real.len() {
        return Err(Error::InvalidArgument(
            "one attribute per penalty pair required".into(),
        ));
    }
    let mut i = 0;
    gradient_penalty_with(tape, real, fake, rng, |tape, u| {
        let a = attrs[i.min(attrs.len() - 1)];
        i += 1;
        discriminate_score(tape, disc, p, u, &a)
    })
}

/// Eq. (6) generator objective: L_adv_F + λ_cls·L_cls_F + λ_cyc·L_cyc + λ_idm·L_idm.
pub fn combine_generator_loss(
    tape: &mut Tape,
    adv_f: Var,
    cls_f: Var,
    cyc: Var,
    idm: Var,
    lam: &Lambdas,
) -> Var {
    let c = tape.scale(cls_f, lam.cls);
    let y = tape.scale(cyc, lam.cyc);
    let i = tape.scale(idm, lam.idm);
    let s1 = tape.add(adv_f, c);
    let s2 = tape.add(y, i);
    tape.add(s1, s2)
}

/// Eq. (6) discriminator objective: L_adv_D + λ_gp·L_gp.
pub fn combine_discriminator_loss(tape: &mut Tape, adv_d: Var, gp: Var, lam: &Lambdas) -> Var {
    let g = tape.scale(gp, lam.gp);
    tape.add(adv_d, g)
}
