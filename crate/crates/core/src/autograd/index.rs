//! Gather-based structural ops: slicing, broadcasting, padding, im2col, and
//! the 16-frame down/up-sampling used by the conversion bottleneck.

use std::sync::Arc;

use super::tape::{GatherSpec, Tape, Var};

fn shape_of(tape: &Tape, v: Var) -> Vec<usize> {
    tape.value(v).shape().to_vec()
}

/// Columns `[start, start+len)` of a 2-D tensor.
pub fn slice_cols(tape: &mut Tape, x: Var, start: usize, len: usize) -> Var {
    let sh = shape_of(tape, x);
    assert_eq!(sh.len(), 2);
    let (rows, cols) = (sh[0], sh[1]);
    assert!(start + len <= cols);
    let mut idx = Vec::with_capacity(rows * len);
    for r in 0..rows {
        for c in start..start + len {
            idx.push((r * cols + c) as i64);
        }
    }
    tape.gather(x, Arc::new(GatherSpec::new(idx, vec![rows, len], sh)))
}

/// Rows `[start, start+len)` of a 2-D tensor.
pub fn slice_rows(tape: &mut Tape, x: Var, start: usize, len: usize) -> Var {
    let sh = shape_of(tape, x);
    assert_eq!(sh.len(), 2);
    let (rows, cols) = (sh[0], sh[1]);
    assert!(start + len <= rows);
    let idx: Vec<i64> = ((start * cols)..((start + len) * cols))
        .map(|i| i as i64)
        .collect();
    tape.gather(x, Arc::new(GatherSpec::new(idx, vec![len, cols], sh)))
}

/// Concatenate 2-D tensors along axis 1.
pub fn concat_cols(tape: &mut Tape, parts: &[Var]) -> Var {
    assert!(!parts.is_empty());
    let rows = shape_of(tape, parts[0])[0];
    let widths: Vec<usize> = parts
        .iter()
        .map(|&p| {
            let sh = shape_of(tape, p);
            assert_eq!(sh.len(), 2);
            assert_eq!(sh[0], rows, "concat_cols: row mismatch");
            sh[1]
        })
        .collect();
    let total: usize = widths.iter().sum();
    // Pad each part into its column slot, then sum.
    let mut acc: Option<Var> = None;
    let mut offset = 0;
    for (&p, &w) in parts.iter().zip(&widths) {
        let sh = shape_of(tape, p);
        let mut idx = vec![-1i64; rows * total];
        for r in 0..rows {
            for c in 0..w {
                idx[r * total + offset + c] = (r * w + c) as i64;
            }
        }
        let padded = tape.gather(p, Arc::new(GatherSpec::new(idx, vec![rows, total], sh)));
        acc = Some(match acc {
            Some(a) => tape.add(a, padded),
            None => padded,
        });
        offset += w;
    }
    acc.unwrap()
}

/// Repeat a `[1, C]` row vector into `[rows, C]`.
pub fn broadcast_row(tape: &mut Tape, v: Var, rows: usize) -> Var {
    let sh = shape_of(tape, v);
    assert_eq!(sh.len(), 2);
    assert_eq!(sh[0], 1);
    let cols = sh[1];
    let mut idx = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        for c in 0..cols {
            idx.push(c as i64);
        }
    }
    tape.gather(v, Arc::new(GatherSpec::new(idx, vec![rows, cols], sh)))
}

/// Broadcast a shape-[1] scalar to an arbitrary shape.
pub fn broadcast_scalar(tape: &mut Tape, s: Var, shape: &[usize]) -> Var {
    let sh = shape_of(tape, s);
    assert_eq!(sh, vec![1]);
    let n: usize = shape.iter().product();
    tape.gather(s, Arc::new(GatherSpec::new(vec![0; n], shape.to_vec(), sh)))
}

/// im2col for a 1-D convolution over `[T, C]` with odd kernel `k`, stride 1 and
/// zero same-padding: output `[T, C*k]`, row t holding the k-frame context.
pub fn im2col_1d(tape: &mut Tape, x: Var, k: usize) -> Var {
    let sh = shape_of(tape, x);
    assert_eq!(sh.len(), 2);
    assert_eq!(k % 2, 1, "im2col_1d expects odd kernel");
    let (t_len, c) = (sh[0], sh[1]);
    let half = (k / 2) as i64;
    let mut idx = Vec::with_capacity(t_len * c * k);
    for t in 0..t_len as i64 {
        for dk in -half..=half {
            let src_t = t + dk;
            for ch in 0..c as i64 {
                if src_t < 0 || src_t >= t_len as i64 {
                    idx.push(-1);
                } else {
                    idx.push(src_t * c as i64 + ch);
                }
            }
        }
    }
    tape.gather(x, Arc::new(GatherSpec::new(idx, vec![t_len, c * k], sh)))
}

/// Spatial geometry of a 2-D feature map stored as an `[H*W, C]` matrix.
#[derive(Copy, Clone, Debug)]
pub struct MapDims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

/// Output height/width of a valid-with-padding convolution.
pub fn conv_out_len(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

/// im2col for a 2-D convolution. Input is `[H*W, C]` row-major over (h, w);
/// output is `[H2*W2, C*kh*kw]` ready for a weight matmul.
#[allow(clippy::too_many_arguments)]
pub fn im2col_2d(
    tape: &mut Tape,
    x: Var,
    dims: MapDims,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
) -> (Var, MapDims) {
    let in_shape = shape_of(tape, x);
    assert_eq!(in_shape, vec![dims.h * dims.w, dims.c]);
    let h2 = conv_out_len(dims.h, kh, sh, ph).expect("im2col_2d: height below kernel");
    let w2 = conv_out_len(dims.w, kw, sw, pw).expect("im2col_2d: width below kernel");
    let mut idx = Vec::with_capacity(h2 * w2 * dims.c * kh * kw);
    for oh in 0..h2 {
        for ow in 0..w2 {
            for ch in 0..dims.c {
                for dh in 0..kh {
                    for dw in 0..kw {
                        let ih = (oh * sh + dh) as i64 - ph as i64;
                        let iw = (ow * sw + dw) as i64 - pw as i64;
                        if ih < 0 || ih >= dims.h as i64 || iw < 0 || iw >= dims.w as i64 {
                            idx.push(-1);
                        } else {
                            idx.push((ih * dims.w as i64 + iw) * dims.c as i64 + ch as i64);
                        }
                    }
                }
            }
        }
    }
    let spec = GatherSpec::new(idx, vec![h2 * w2, dims.c * kh * kw], in_shape);
    let out = tape.gather(x, Arc::new(spec));
    (
        out,
        MapDims {
            h: h2,
            w: w2,
            c: dims.c * kh * kw,
        },
    )
}

/// Piecewise-constant 16-frame bottleneck: pick the forward half of the code
/// at block ends and the backward half at block starts, then hold each choice
/// over its block. `x` is `[T, 2*half]` with the forward stream first.
pub fn bottleneck_16(tape: &mut Tape, x: Var, block: usize) -> Var {
    let sh = shape_of(tape, x);
    assert_eq!(sh.len(), 2);
    let (t_len, c) = (sh[0], sh[1]);
    assert_eq!(c % 2, 0, "bottleneck expects concatenated fwd/bwd streams");
    assert_eq!(t_len % block, 0, "frame count must divide into blocks");
    let half = c / 2;
    let mut idx = Vec::with_capacity(t_len * c);
    for t in 0..t_len {
        let b = t / block;
        let fwd_t = b * block + (block - 1); // block end
        let bwd_t = b * block; // block start
        for ch in 0..half {
            idx.push((fwd_t * c + ch) as i64);
        }
        for ch in 0..half {
            idx.push((bwd_t * c + half + ch) as i64);
        }
    }
    tape.gather(x, Arc::new(GatherSpec::new(idx, vec![t_len, c], sh)))
}
