//! Minimal reverse-mode autodiff used by every trainable network here.

pub mod index;
pub mod nn;
pub mod tape;

pub use tape::{GatherSpec, Tape, Var};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{ArrayD, IxDyn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::index::*;
    use super::nn::*;
    use super::*;

    fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }

    /// Central finite-difference check of `f` at `x0` against the tape
    /// gradient, elementwise, relative to the larger magnitude.
    fn check_gradient<F>(x0: &ArrayD<f64>, f: F, tol: f64)
    where
        F: Fn(&mut Tape, Var) -> Var,
    {
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let loss = f(&mut tape, x);
        let grads = tape.grad(loss, &[x]);
        let analytic = tape.value(grads[0]).to_owned();

        let h = 1e-5;
        for i in 0..x0.len() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp.as_slice_mut().unwrap()[i] += h;
            xm.as_slice_mut().unwrap()[i] -= h;
            let mut tp = Tape::new();
            let vp = tp.leaf(xp);
            let lv = f(&mut tp, vp);
            let lp = tp.scalar_value(lv);
            let mut tm = Tape::new();
            let vm = tm.leaf(xm);
            let lv = f(&mut tm, vm);
            let lm = tm.scalar_value(lv);
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (a - numeric).abs() / denom < tol,
                "grad mismatch at {i}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn grad_elementwise_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = randn(&mut rng, &[3, 4]);
        check_gradient(
            &x0,
            |t, x| {
                let s = t.sigmoid(x);
                let th = t.tanh(s);
                let e = t.exp(th);
                let sq = t.mul(e, e);
                t.mean(sq)
            },
            1e-6,
        );
    }

    #[test]
    fn grad_matmul_and_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = randn(&mut rng, &[4, 6]);
        let w = randn(&mut rng, &[3, 5]);
        check_gradient(
            &x0,
            move |t, x| {
                let a = slice_cols(t, x, 1, 3);
                let a = slice_rows(t, a, 0, 3);
                let wv = t.leaf(w.clone());
                let y = t.matmul(a, wv);
                let y = t.tanh(y);
                t.mean(y)
            },
            1e-6,
        );
    }

    #[test]
    fn grad_through_ln_sqrt_recip_abs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = randn(&mut rng, &[8]).mapv(|v| v.abs() + 0.5);
        check_gradient(
            &x0,
            |t, x| {
                let l = t.ln(x);
                let s = t.sqrt(x);
                let r = t.recip(x);
                let a = t.add(l, s);
                let a = t.add(a, r);
                let a = t.abs(a);
                t.sum(a)
            },
            1e-6,
        );
    }

    #[test]
    fn grad_gather_scatter_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = randn(&mut rng, &[5, 3]);
        check_gradient(
            &x0,
            |t, x| {
                let ctx = im2col_1d(t, x, 3);
                let sq = t.mul(ctx, ctx);
                t.mean(sq)
            },
            1e-6,
        );
    }

    #[test]
    fn grad_concat_and_broadcast() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = randn(&mut rng, &[1, 4]);
        check_gradient(
            &x0,
            |t, x| {
                let b = broadcast_row(t, x, 6);
                let c = concat_cols(t, &[b, b]);
                let s = t.sigmoid(c);
                t.mean(s)
            },
            1e-6,
        );
    }

    #[test]
    fn grad_lstm_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        add_lstm(&mut store, &mut rng, "l", 3, 4);
        let x0 = randn(&mut rng, &[5, 3]);
        // Check the gradient w.r.t. the fused weight matrix.
        let w0 = store.get("l.w").clone();
        let b0 = store.get("l.b").clone();
        let x0c = x0.clone();
        let run = move |t: &mut Tape, w: Var, b: Var, x: ArrayD<f64>| -> Var {
            let xv = t.leaf(x);
            lstm_manual(t, w, b, xv, 4)
        };
        let mut tape = Tape::new();
        let w = tape.leaf(w0.clone());
        let b = tape.leaf(b0.clone());
        let loss = run(&mut tape, w, b, x0.clone());
        let grads = tape.grad(loss, &[w]);
        let analytic = tape.value(grads[0]).to_owned();
        let h = 1e-5;
        let mut checked = 0;
        for i in (0..w0.len()).step_by(w0.len() / 12 + 1) {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp.as_slice_mut().unwrap()[i] += h;
            wm.as_slice_mut().unwrap()[i] -= h;
            let mut tp = Tape::new();
            let wpv = tp.leaf(wp);
            let bv = tp.leaf(b0.clone());
            let lv = run(&mut tp, wpv, bv, x0c.clone());
            let lp = tp.scalar_value(lv);
            let mut tm = Tape::new();
            let wmv = tm.leaf(wm);
            let bv = tm.leaf(b0.clone());
            let lv = run(&mut tm, wmv, bv, x0c.clone());
            let lm = tm.scalar_value(lv);
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (a - numeric).abs() / denom < 1e-5,
                "lstm grad mismatch at {i}"
            );
            checked += 1;
        }
        assert!(checked >= 10);
    }

    // LSTM forward wired directly from Vars, for the gradient test above.
    fn lstm_manual(t: &mut Tape, w: Var, b: Var, x: Var, hidden: usize) -> Var {
        let t_len = t.value(x).shape()[0];
        let mut h = t.zeros(&[1, hidden]);
        let mut c = t.zeros(&[1, hidden]);
        let mut outs = vec![h; t_len];
        for step in 0..t_len {
            let xt = slice_rows(t, x, step, 1);
            let xh = concat_cols(t, &[xt, h]);
            let lin = t.matmul(xh, w);
            let gates = t.add(lin, b);
            let i = slice_cols(t, gates, 0, hidden);
            let f = slice_cols(t, gates, hidden, hidden);
            let g = slice_cols(t, gates, 2 * hidden, hidden);
            let o = slice_cols(t, gates, 3 * hidden, hidden);
            let i = t.sigmoid(i);
            let f = t.sigmoid(f);
            let g = t.tanh(g);
            let o = t.sigmoid(o);
            let fc = t.mul(f, c);
            let ig = t.mul(i, g);
            c = t.add(fc, ig);
            let tc = t.tanh(c);
            h = t.mul(o, tc);
            outs[step] = h;
        }
        let seq = t.concat_rows(&outs);
        let sq = t.mul(seq, seq);
        t.mean(sq)
    }

    #[test]
    fn double_backward_gradient_norm() {
        // d/dw of (||dy/dx|| - 1)^2 for y = sum(sigmoid(x W)) must match
        // finite differences: the core requirement for the gradient penalty.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w0 = randn(&mut rng, &[3, 2]);
        let x0 = randn(&mut rng, &[1, 3]);

        let penalty = |t: &mut Tape, w: Var, x0: &ArrayD<f64>| -> Var {
            let x = t.leaf(x0.clone());
            let y0 = t.matmul(x, w);
            let y = t.sigmoid(y0);
            let s = t.sum(y);
            let gx = t.grad(s, &[x])[0];
            let gsq = t.mul(gx, gx);
            let nsq = t.sum(gsq);
            let n = t.sqrt(nsq);
            let d = t.add_scalar(n, -1.0);
            let d2 = t.mul(d, d);
            t.sum(d2)
        };

        let mut tape = Tape::new();
        let w = tape.leaf(w0.clone());
        let p = penalty(&mut tape, w, &x0);
        let gw = tape.grad(p, &[w]);
        let analytic = tape.value(gw[0]).to_owned();

        let h = 1e-5;
        for i in 0..w0.len() {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp.as_slice_mut().unwrap()[i] += h;
            wm.as_slice_mut().unwrap()[i] -= h;
            let mut tp = Tape::new();
            let wv = tp.leaf(wp);
            let lv = penalty(&mut tp, wv, &x0);
            let lp = tp.scalar_value(lv);
            let mut tm = Tape::new();
            let wv = tm.leaf(wm);
            let lv = penalty(&mut tm, wv, &x0);
            let lm = tm.scalar_value(lv);
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (a - numeric).abs() / denom < 1e-4,
                "double-backward mismatch at {i}: {a} vs {numeric}"
            );
        }
    }

    #[test]
    fn adam_reduces_quadratic() {
        let mut store = ParamStore::new();
        store.add("x", ArrayD::from_elem(IxDyn(&[4]), 3.0));
        let mut adam = Adam::new(&store, 0.1);
        for _ in 0..300 {
            let mut tape = Tape::new();
            let lifted = store.lift(&mut tape);
            let x = lifted.var("x");
            let sq = tape.mul(x, x);
            let loss = tape.sum(sq);
            let grads = tape.grad(loss, &lifted.vars);
            let garr: Vec<_> = grads.iter().map(|g| tape.value(*g).to_owned()).collect();
            adam.step(&mut store, &garr);
        }
        assert!(store.get("x").iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn gather_pads_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(ArrayD::from_shape_vec(IxDyn(&[2]), vec![5.0, 7.0]).unwrap());
        let spec = Arc::new(GatherSpec::new(vec![1, -1, 0], vec![3], vec![2]));
        let y = tape.gather(x, spec);
        assert_eq!(tape.value(y).as_slice().unwrap(), &[7.0, 0.0, 5.0]);
    }
}
