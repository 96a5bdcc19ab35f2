//! Conditional discriminator and speaker classifier (2-D conv stacks over
//! frequency x time maps of the log-mel input).

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;

use crate::autograd::index::{concat_cols, im2col_2d, MapDims};
use crate::autograd::nn::{add_linear, linear, softmax_row, Lifted, ParamStore};
use crate::autograd::tape::{Tape, Var};
use crate::corpus::SpeakerAttribute;
use crate::error::{Error, Result};
use crate::signal::N_MELS;

use super::ModelProfile;

/// (kernel, stride, pad) per discriminator layer as (freq, time) pairs. The
/// frequency axis keeps width 80 through the stack (pad 1 for kernel 3) and
/// collapses in the final kernel-80 layer; the time axis is unpadded.
const DISC_GEOM: [((usize, usize), (usize, usize), (usize, usize)); 5] = [
    ((3, 9), (1, 1), (1, 0)),
    ((3, 8), (1, 2), (1, 0)),
    ((3, 8), (1, 2), (1, 0)),
    ((3, 6), (1, 2), (1, 0)),
    ((80, 5), (1, 1), (0, 0)),
];

/// Smallest frame count the unpadded time axis of the discriminator stack
/// admits (every layer must produce at least one column).
pub const DISCRIMINATOR_MIN_FRAMES: usize = 82;

/// Classifier geometry. Its stride-4 time axis would need hundreds of frames
/// under valid convolution, so time is zero-padded (pad = kernel/2) while
/// frequency stays valid and collapses 80 -> 1 exactly.
const CLS_GEOM: [((usize, usize), (usize, usize), (usize, usize)); 5] = [
    ((2, 2), (4, 4), (0, 1)),
    ((2, 2), (4, 4), (0, 1)),
    ((2, 2), (4, 4), (0, 1)),
    ((1, 2), (5, 4), (0, 1)),
    ((1, 2), (6, 4), (0, 1)),
];

/// Inputs shorter than this are rejected as degenerate for classification.
pub const CLASSIFIER_MIN_FRAMES: usize = 16;

pub fn add_discriminator_params(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    p: &ModelProfile,
    k: usize,
) {
    let mut cin = 1 + k;
    for (i, ((kh, kw), _, _)) in DISC_GEOM.iter().enumerate() {
        add_linear(
            store,
            rng,
            &format!("disc.conv{i}"),
            cin * kh * kw,
            p.disc_ch[i],
        );
        cin = p.disc_ch[i];
    }
}

pub fn add_classifier_params(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    p: &ModelProfile,
    k: usize,
) {
    let mut cin = 1;
    for (i, ((kh, kw), _, _)) in CLS_GEOM.iter().enumerate() {
        let cout = if i == 4 { k } else { p.cls_ch[i] };
        add_linear(store, rng, &format!("cls.conv{i}"), cin * kh * kw, cout);
        cin = cout;
    }
}

/// Rearrange `lms [T, 80]` into the conv layout `[80*T, 1]` (frequency-major
/// positions, single channel).
fn to_map(tape: &mut Tape, lms: Var) -> (Var, usize) {
    let t = tape.value(lms).shape()[0];
    let ft = tape.transpose(lms); // [80, T]
    (tape.reshape(ft, &[N_MELS * t, 1]), t)
}

/// Mean over the position rows of a `[P, C]` map -> `[1, C]`.
fn pool_positions(tape: &mut Tape, x: Var) -> Var {
    let p = tape.value(x).shape()[0];
    let ones = tape.leaf(ArrayD::from_elem(IxDyn(&[1, p]), 1.0 / p as f64));
    tape.matmul(ones, x)
}

/// Pre-sigmoid discriminator score of `lms` conditioned on `attr` via
/// constant per-speaker planes. Scalar output.
pub fn discriminate_score(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    lms: Var,
    attr: &SpeakerAttribute,
) -> Result<Var> {
    let (map, t) = to_map(tape, lms);
    if t < DISCRIMINATOR_MIN_FRAMES {
        return Err(Error::InvalidArgument(format!(
            "discriminator needs at least {DISCRIMINATOR_MIN_FRAMES} frames, got {t}"
        )));
    }
    let onehot = attr.onehot();
    let planes = tape.leaf(ArrayD::from_shape_fn(
        IxDyn(&[N_MELS * t, onehot.len()]),
        |ix| onehot[ix[1]],
    ));
    let mut h = concat_cols(tape, &[map, planes]);
    let mut dims = MapDims {
        h: N_MELS,
        w: t,
        c: 1 + onehot.len(),
    };
    for (i, ((kh, kw), (sh, sw), (ph, pw))) in DISC_GEOM.iter().enumerate() {
        let (cols, out) = im2col_2d(tape, h, dims, *kh, *kw, *sh, *sw, *ph, *pw);
        h = linear(tape, l, &format!("disc.conv{i}"), cols);
        dims = MapDims {
            h: out.h,
            w: out.w,
            c: p.disc_ch[i],
        };
        if i < 4 {
            h = tape.leaky_relu(h, 0.2);
        }
    }
    let pooled = pool_positions(tape, h); // [1, ch]
    Ok(tape.mean(pooled))
}

/// `D(lms, attr)` in (0, 1).
pub fn discriminate(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    lms: Var,
    attr: &SpeakerAttribute,
) -> Result<Var> {
    let score = discriminate_score(tape, l, p, lms, attr)?;
    Ok(tape.sigmoid(score))
}

/// Speaker posterior `[1, K]`; rows sum to one.
pub fn classify(tape: &mut Tape, l: &Lifted, p: &ModelProfile, lms: Var, k: usize) -> Result<Var> {
    let logits = classify_logits(tape, l, p, lms, k)?;
    Ok(softmax_row(tape, logits))
}

pub fn classify_logits(
    tape: &mut Tape,
    l: &Lifted,
    p: &ModelProfile,
    lms: Var,
    k: usize,
) -> Result<Var> {
    let (map, t) = to_map(tape, lms);
    if t < CLASSIFIER_MIN_FRAMES {
        return Err(Error::InvalidArgument(format!(
            "classifier needs at least {CLASSIFIER_MIN_FRAMES} frames, got {t}"
        )));
    }
    let mut h = map;
    let mut dims = MapDims {
        h: N_MELS,
        w: t,
        c: 1,
    };
    for (i, ((kh, kw), (sh, sw), (ph, pw))) in CLS_GEOM.iter().enumerate() {
        let cout = if i == 4 { k } else { p.cls_ch[i] };
        let (cols, out) = im2col_2d(tape, h, dims, *kh, *kw, *sh, *sw, *ph, *pw);
        h = linear(tape, l, &format!("cls.conv{i}"), cols);
        dims = MapDims {
            h: out.h,
            w: out.w,
            c: cout,
        };
        if i < 4 {
            h = tape.leaky_relu(h, 0.2);
        }
    }
    Ok(pool_positions(tape, h))
}
