//! BLSTM speech enhancer: two bidirectional recurrent layers and an 80-node
//! output layer mapping noisy log-mel frames to enhanced ones.

use rand_chacha::ChaCha8Rng;

use crate::autograd::nn::{add_blstm, add_linear, blstm_seq, linear, mse, Lifted, ParamStore};
use crate::autograd::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::signal::N_MELS;

use super::ModelProfile;

pub fn add_se_params(store: &mut ParamStore, rng: &mut ChaCha8Rng, p: &ModelProfile) {
    add_blstm(store, rng, "se.blstm0", N_MELS, p.se_cells);
    add_blstm(store, rng, "se.blstm1", 2 * p.se_cells, p.se_cells);
    add_linear(store, rng, "se.out", 2 * p.se_cells, N_MELS);
}

/// `x [T, 80]` noisy log-mel -> `[T, 80]` enhanced log-mel.
pub fn se_forward(tape: &mut Tape, l: &Lifted, p: &ModelProfile, x: Var) -> Var {
    let h = blstm_seq(tape, l, "se.blstm0", x, p.se_cells);
    let h = blstm_seq(tape, l, "se.blstm1", h, p.se_cells);
    linear(tape, l, "se.out", h)
}

/// Mean squared error over all frames and bands.
pub fn se_loss(tape: &mut Tape, enhanced: Var, clean: Var) -> Result<Var> {
    let (a, b) = (
        tape.value(enhanced).shape().to_vec(),
        tape.value(clean).shape().to_vec(),
    );
    if a != b {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch {a:?} vs {b:?}"
        )));
    }
    Ok(mse(tape, enhanced, clean))
}
