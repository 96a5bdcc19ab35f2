//! Conversion autoencoder: conv + BLSTM encoder with a 16-frame temporal
//! bottleneck, recurrent decoder, and residual post-net.

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;

use crate::autograd::index::{bottleneck_16, broadcast_row, concat_cols};
use crate::autograd::nn::{
    add_blstm, add_conv1d, add_linear, add_lstm, add_norm, blstm_seq, conv1d_same, linear,
    lstm_seq, norm_time, Lifted, ParamStore,
};
use crate::autograd::tape::{Tape, Var};
use crate::corpus::SpeakerAttribute;
use crate::error::{Error, Result};
use crate::signal::N_MELS;

use super::se::se_forward;
use super::ModelProfile;

/// Temporal bottleneck block length.
pub const BOTTLENECK_BLOCK: usize = 16;

const CONV_K: usize = 5;

pub fn add_autovc_params(store: &mut ParamStore, rng: &mut ChaCha8Rng, p: &ModelProfile, k: usize) {
    let mut cin = N_MELS + k;
    for i in 0..3 {
        add_conv1d(store, rng, &format!("enc.conv{i}"), cin, p.conv, CONV_K);
        add_norm(store, &format!("enc.norm{i}"), p.conv);
        cin = p.conv;
    }
    add_blstm(store, rng, "enc.blstm0", p.conv, p.enc_lstm);
    add_blstm(store, rng, "enc.blstm1", 2 * p.enc_lstm, p.enc_lstm);

    let mut din = p.content_dim() + k;
    for (i, &cells) in p.dec_lstm.iter().enumerate() {
        add_lstm(store, rng, &format!("dec.lstm{i}"), din, cells);
        din = cells;
    }
    add_linear(store, rng, "dec.out", din, N_MELS);

    let mut cin = N_MELS;
    for i in 0..4 {
        add_conv1d(store, rng, &format!("post.conv{i}"), cin, p.conv, CONV_K);
        add_norm(store, &format!("post.norm{i}"), p.conv);
        cin = p.conv;
    }
    add_conv1d(store, rng, "post.conv4", cin, N_MELS, CONV_K);
}

/// Broadcast a one-hot attribute to `[t, K]` constant rows.
pub fn attr_rows(tape: &mut Tape, attr: &SpeakerAttribute, t: usize) -> Var {
    let onehot = attr.onehot();
    let row = tape.leaf(ArrayD::from_shape_vec(IxDyn(&[1, onehot.len()]), onehot).unwrap());
    broadcast_row(tape, row, t)
}

/// `lms [T, 80]` + source attribute -> piecewise-constant content code
/// `[T, 2 * enc_lstm]`. T must divide into 16-frame blocks.
pub fn encode(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    lms: Var,
    src: &SpeakerAttribute,
) -> Result<Var> {
    let t = tape.value(lms).shape()[0];
    if t == 0 || t % BOTTLENECK_BLOCK != 0 {
        return Err(Error::InvalidArgument(format!(
            "frame count {t} must be a positive multiple of {BOTTLENECK_BLOCK}"
        )));
    }
    let attrs = attr_rows(tape, src, t);
    let mut h = concat_cols(tape, &[lms, attrs]);
    for i in 0..3 {
        h = conv1d_same(tape, l, &format!("enc.conv{i}"), h, CONV_K);
        h = norm_time(tape, l, &format!("enc.norm{i}"), h);
        h = tape.relu(h);
    }
    let h = blstm_seq(tape, l, "enc.blstm0", h, p.enc_lstm);
    let h = blstm_seq(tape, l, "enc.blstm1", h, p.enc_lstm);
    Ok(bottleneck_16(tape, h, BOTTLENECK_BLOCK))
}

/// Content code + target attribute -> (t̃ decoder output, t̂ post-net refined).
pub fn decode(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    code: Var,
    tgt: &SpeakerAttribute,
) -> Result<(Var, Var)> {
    if tape.value(code).iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("content code is not finite".into()));
    }
    let t = tape.value(code).shape()[0];
    let attrs = attr_rows(tape, tgt, t);
    let mut h = concat_cols(tape, &[code, attrs]);
    for (i, &cells) in p.dec_lstm.iter().enumerate() {
        h = lstm_seq(tape, l, &format!("dec.lstm{i}"), h, cells, false);
    }
    let tilde = linear(tape, l, "dec.out", h);

    let mut r = tilde;
    for i in 0..4 {
        r = conv1d_same(tape, l, &format!("post.conv{i}"), r, CONV_K);
        r = norm_time(tape, l, &format!("post.norm{i}"), r);
        r = tape.tanh(r);
    }
    let residual = conv1d_same(tape, l, "post.conv4", r, CONV_K);
    let hat = tape.add(tilde, residual);
    Ok((tilde, hat))
}

/// Full conversion pass: `(t̃, t̂) = F_auto(lms, src, tgt)`.
pub fn autovc_forward(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    lms: Var,
    src: &SpeakerAttribute,
    tgt: &SpeakerAttribute,
) -> Result<(Var, Var)> {
    let code = encode(tape, l, p, lms, src)?;
    decode(tape, l, p, code, tgt)
}

/// Composed generator `t̂ = F(x, src, tgt)`: enhancement followed by
/// conversion, differentiable end to end.
pub fn generator_forward(
    tape: &mut Tape,
    se_l: &Lifted,
    vc_l: &Lifted,
    p: &ModelProfile,
    noisy: Var,
    src: &SpeakerAttribute,
    tgt: &SpeakerAttribute,
) -> Result<Var> {
    let enhanced = se_forward(tape, se_l, p, noisy);
    let (_, hat) = autovc_forward(tape, vc_l, p, enhanced, src, tgt)?;
    Ok(hat)
}
