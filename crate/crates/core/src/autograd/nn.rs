//! Neural-network building blocks over the tape: parameter storage, layer
//! forward helpers, and the Adam optimizer.

use std::collections::HashMap;

use ndarray::{Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::index::{broadcast_row, concat_cols, im2col_1d, slice_cols, slice_rows};
use super::tape::{Tape, Var};

/// Named, ordered parameter container for one network. Order is creation
/// order and is the contract between lifting, gradients, the optimizer, and
/// checkpoint serialization.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<ArrayD<f64>>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: ArrayD<f64>) {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter {name}"
        );
        self.by_name.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> &ArrayD<f64> {
        &self.values[*self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("no parameter {name}"))]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.values.iter())
    }

    pub fn values(&self) -> &[ArrayD<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [ArrayD<f64>] {
        &mut self.values
    }

    pub fn set(&mut self, name: &str, value: ArrayD<f64>) {
        let i = *self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("no parameter {name}"));
        assert_eq!(
            self.values[i].shape(),
            value.shape(),
            "shape change for {name}"
        );
        self.values[i] = value;
    }

    /// Put every parameter on the tape, returning handles in store order.
    pub fn lift(&self, tape: &mut Tape) -> Lifted {
        let vars: Vec<Var> = self.values.iter().map(|v| tape.leaf(v.clone())).collect();
        Lifted {
            vars,
            by_name: self.by_name.clone(),
        }
    }
}

/// Tape handles for one lifted [`ParamStore`].
pub struct Lifted {
    pub vars: Vec<Var>,
    by_name: HashMap<String, usize>,
}

impl Lifted {
    pub fn var(&self, name: &str) -> Var {
        self.vars[*self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("no parameter {name}"))]
    }
}

/// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> ArrayD<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Array2::from_shape_vec((rows, cols), data)
        .unwrap()
        .into_dyn()
}

pub fn zeros(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::zeros(IxDyn(shape))
}

pub fn ones(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::ones(IxDyn(shape))
}

/// Register a dense layer: weight `[in, out]`, bias `[1, out]`.
pub fn add_linear(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    inp: usize,
    out: usize,
) {
    store.add(&format!("{prefix}.w"), init_matrix(rng, inp, out, inp));
    store.add(&format!("{prefix}.b"), zeros(&[1, out]));
}

/// `x [T, in] -> [T, out]`.
pub fn linear(tape: &mut Tape, p: &Lifted, prefix: &str, x: Var) -> Var {
    let rows = tape.value(x).shape()[0];
    let w = p.var(&format!("{prefix}.w"));
    let b = p.var(&format!("{prefix}.b"));
    let y = tape.matmul(x, w);
    let bb = broadcast_row(tape, b, rows);
    tape.add(y, bb)
}

/// Register an LSTM layer: fused gate weight `[in+h, 4h]` in (i, f, g, o)
/// order, bias `[1, 4h]` with forget gate bias 1.
pub fn add_lstm(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    inp: usize,
    hidden: usize,
) {
    store.add(
        &format!("{prefix}.w"),
        init_matrix(rng, inp + hidden, 4 * hidden, inp + hidden),
    );
    let mut b = zeros(&[1, 4 * hidden]);
    for j in hidden..2 * hidden {
        b[[0, j]] = 1.0;
    }
    store.add(&format!("{prefix}.b"), b);
}

/// Run an LSTM over `x [T, in]`, returning hidden states `[T, h]`.
/// `reverse` scans the sequence back to front (output stays in input order).
pub fn lstm_seq(
    tape: &mut Tape,
    p: &Lifted,
    prefix: &str,
    x: Var,
    hidden: usize,
    reverse: bool,
) -> Var {
    let t_len = tape.value(x).shape()[0];
    let w = p.var(&format!("{prefix}.w"));
    let b = p.var(&format!("{prefix}.b"));
    let mut h = tape.zeros(&[1, hidden]);
    let mut c = tape.zeros(&[1, hidden]);
    let mut outs: Vec<Var> = vec![h; t_len];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let xt = slice_rows(tape, x, t, 1);
        let xh = concat_cols(tape, &[xt, h]);
        let gates_lin = tape.matmul(xh, w);
        let gates = tape.add(gates_lin, b);
        let i = slice_cols(tape, gates, 0, hidden);
        let f = slice_cols(tape, gates, hidden, hidden);
        let g = slice_cols(tape, gates, 2 * hidden, hidden);
        let o = slice_cols(tape, gates, 3 * hidden, hidden);
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        c = tape.add(fc, ig);
        let tc = tape.tanh(c);
        h = tape.mul(o, tc);
        outs[t] = h;
    }
    tape.concat_rows(&outs)
}

/// Bidirectional LSTM: forward and backward passes concatenated to `[T, 2h]`.
pub fn blstm_seq(tape: &mut Tape, p: &Lifted, prefix: &str, x: Var, hidden: usize) -> Var {
    let fwd = lstm_seq(tape, p, &format!("{prefix}.fwd"), x, hidden, false);
    let bwd = lstm_seq(tape, p, &format!("{prefix}.bwd"), x, hidden, true);
    concat_cols(tape, &[fwd, bwd])
}

pub fn add_blstm(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    inp: usize,
    hidden: usize,
) {
    add_lstm(store, rng, &format!("{prefix}.fwd"), inp, hidden);
    add_lstm(store, rng, &format!("{prefix}.bwd"), inp, hidden);
}

/// Register a 1-D convolution (kernel k, stride 1, same padding).
pub fn add_conv1d(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    cin: usize,
    cout: usize,
    k: usize,
) {
    store.add(
        &format!("{prefix}.w"),
        init_matrix(rng, cin * k, cout, cin * k),
    );
    store.add(&format!("{prefix}.b"), zeros(&[1, cout]));
}

/// `x [T, cin] -> [T, cout]`, kernel k, stride 1, zero same-padding.
pub fn conv1d_same(tape: &mut Tape, p: &Lifted, prefix: &str, x: Var, k: usize) -> Var {
    let ctx = im2col_1d(tape, x, k);
    linear(tape, p, prefix, ctx)
}

/// Per-channel normalization over the time axis with learned scale/shift.
/// For the per-utterance forward passes used here this realizes both the
/// encoder's instance normalization and the post-net's batch normalization.
pub fn norm_time(tape: &mut Tape, p: &Lifted, prefix: &str, x: Var) -> Var {
    const EPS: f64 = 1e-5;
    let sh = tape.value(x).shape().to_vec();
    let (t_len, c) = (sh[0], sh[1]);
    let ones_row = tape.leaf(ArrayD::from_elem(IxDyn(&[1, t_len]), 1.0 / t_len as f64));
    let mean = tape.matmul(ones_row, x); // [1, c]
    let mean_b = broadcast_row(tape, mean, t_len);
    let centered = tape.sub(x, mean_b);
    let sq = tape.mul(centered, centered);
    let var = tape.matmul(ones_row, sq); // [1, c]
    let var_eps = tape.add_scalar(var, EPS);
    let std = tape.sqrt(var_eps);
    let inv_std = tape.recip(std);
    let inv_b = broadcast_row(tape, inv_std, t_len);
    let normed = tape.mul(centered, inv_b);
    let gamma = p.var(&format!("{prefix}.gamma"));
    let beta = p.var(&format!("{prefix}.beta"));
    let gamma_b = broadcast_row(tape, gamma, t_len);
    let beta_b = broadcast_row(tape, beta, t_len);
    let scaled = tape.mul(normed, gamma_b);
    let _ = c;
    tape.add(scaled, beta_b)
}

pub fn add_norm(store: &mut ParamStore, prefix: &str, c: usize) {
    store.add(&format!("{prefix}.gamma"), ones(&[1, c]));
    store.add(&format!("{prefix}.beta"), zeros(&[1, c]));
}

/// Numerically stable softmax of a `[1, K]` logit row.
pub fn softmax_row(tape: &mut Tape, logits: Var) -> Var {
    let k = tape.value(logits).shape()[1];
    let max = tape
        .value(logits)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = tape.add_scalar(logits, -max);
    let e = tape.exp(shifted);
    let s = tape.sum(e);
    let inv = tape.recip(s);
    let inv_b = super::index::broadcast_scalar(tape, inv, &[1, k]);
    tape.mul(e, inv_b)
}

/// Mean squared error between equal-shaped tensors, as a scalar var.
pub fn mse(tape: &mut Tape, a: Var, b: Var) -> Var {
    let d = tape.sub(a, b);
    let sq = tape.mul(d, d);
    tape.mean(sq)
}

/// Mean absolute error between equal-shaped tensors, as a scalar var.
pub fn l1(tape: &mut Tape, a: Var, b: Var) -> Var {
    let d = tape.sub(a, b);
    let ad = tape.abs(d);
    tape.mean(ad)
}

/// Adam optimizer state for one [`ParamStore`].
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store
            .values()
            .iter()
            .map(|p| ArrayD::zeros(p.raw_dim()))
            .collect();
        let v = store
            .values()
            .iter()
            .map(|p| ArrayD::zeros(p.raw_dim()))
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    /// Apply one update. `grads` must be aligned with the store order.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[ArrayD<f64>]) {
        assert_eq!(grads.len(), store.len(), "gradient count mismatch");
        self.step += 1;
        let b1c = 1.0 - self.beta1.powi(self.step as i32);
        let b2c = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in store
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(&mut *p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    let mhat = m / b1c;
                    let vhat = v / b2c;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}
