//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Values are eagerly evaluated `f64` tensors. The backward pass is itself
//! expressed as tape operations, so gradients are ordinary [`Var`]s and can be
//! differentiated again. Second-order terms (the discriminator's input-gradient
//! norm penalty) fall out of the same mechanism.

use std::sync::Arc;

use ndarray::{ArrayD, ArrayViewD, Ix2, IxDyn};

/// Handle to a node on a [`Tape`]. Cheap to copy; only meaningful together
/// with the tape that produced it.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Index map shared by a gather and its transposed scatter-add.
///
/// `idx[i]` is the flat source element for output element `i`, or -1 for an
/// implicit zero (padding).
#[derive(Debug)]
pub struct GatherSpec {
    pub idx: Vec<i64>,
    pub out_shape: Vec<usize>,
    pub in_shape: Vec<usize>,
}

impl GatherSpec {
    pub fn new(idx: Vec<i64>, out_shape: Vec<usize>, in_shape: Vec<usize>) -> Self {
        let out_len: usize = out_shape.iter().product();
        assert_eq!(idx.len(), out_len, "gather index length must match output");
        let in_len: usize = in_shape.iter().product();
        for &i in &idx {
            assert!(
                i >= -1 && (i as i128) < in_len as i128,
                "gather index out of range"
            );
        }
        GatherSpec {
            idx,
            out_shape,
            in_shape,
        }
    }
}

#[derive(Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul(usize, usize),
    Transpose(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Recip(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Abs(usize),
    ClampMin(usize, f64),
    Sum(usize),
    MulConst(usize, Arc<ArrayD<f64>>),
    Gather(usize, Arc<GatherSpec>),
    ScatterAdd(usize, Arc<GatherSpec>),
    Reshape(usize),
    ConcatRows(Vec<usize>),
}

struct Node {
    value: ArrayD<f64>,
    op: Op,
}

/// Flat computation tape. One tape per forward/backward episode; dropped
/// wholesale after the optimizer step consumes the gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> ArrayViewD<'_, f64> {
        self.nodes[v.0].value.view()
    }

    /// Value of a single-element tensor.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let val = &self.nodes[v.0].value;
        assert_eq!(val.len(), 1, "scalar_value on non-scalar");
        *val.iter().next().unwrap()
    }

    fn push(&mut self, value: ArrayD<f64>, op: Op) -> Var {
        debug_assert!(value.iter().all(|x| x.is_finite()), "non-finite tape value");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.leaf(ArrayD::from_elem(IxDyn(&[1]), x))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.leaf(ArrayD::zeros(IxDyn(shape)))
    }

    fn binary_same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "{what}: shape mismatch"
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, "add");
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, "sub");
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, "mul");
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = &self.nodes[a.0].value * c;
        self.push(v, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = &self.nodes[a.0].value + c;
        self.push(v, Op::AddScalar(a.0))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul lhs 2d");
        let bv = self.nodes[b.0]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul rhs 2d");
        assert_eq!(av.ncols(), bv.nrows(), "matmul inner dims");
        let v = av.dot(&bv).into_dyn();
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("transpose 2d");
        let v = av.t().to_owned().into_dyn();
        self.push(v, Op::Transpose(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::exp);
        self.push(v, Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::ln);
        self.push(v, Op::Ln(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::sqrt);
        self.push(v, Op::Sqrt(a.0))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| 1.0 / x);
        self.push(v, Op::Recip(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }

    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Var {
        let v = self.nodes[a.0]
            .value
            .mapv(|x| if x > 0.0 { x } else { alpha * x });
        self.push(v, Op::LeakyRelu(a.0, alpha))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::abs);
        self.push(v, Op::Abs(a.0))
    }

    /// Elementwise max(a, c).
    pub fn clamp_min(&mut self, a: Var, c: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.max(c));
        self.push(v, Op::ClampMin(a.0, c))
    }

    /// Sum of all elements, as a shape-[1] tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.sum();
        self.push(ArrayD::from_elem(IxDyn(&[1]), s), Op::Sum(a.0))
    }

    /// Mean of all elements, as a shape-[1] tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Elementwise product with a constant tensor (not differentiated into).
    pub fn mul_const(&mut self, a: Var, c: Arc<ArrayD<f64>>) -> Var {
        assert_eq!(self.nodes[a.0].value.shape(), c.shape(), "mul_const shape");
        let v = &self.nodes[a.0].value * &*c;
        self.push(v, Op::MulConst(a.0, c))
    }

    pub fn gather(&mut self, a: Var, spec: Arc<GatherSpec>) -> Var {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            &spec.in_shape[..],
            "gather input shape"
        );
        let src: Vec<f64> = self.nodes[a.0].value.iter().copied().collect();
        let out: Vec<f64> = spec
            .idx
            .iter()
            .map(|&i| if i < 0 { 0.0 } else { src[i as usize] })
            .collect();
        let v = ArrayD::from_shape_vec(IxDyn(&spec.out_shape), out).unwrap();
        self.push(v, Op::Gather(a.0, spec))
    }

    /// Transpose of [`Tape::gather`]: scatter-add `a` (shaped like the gather
    /// output) back into the gather's input shape.
    pub fn scatter_add(&mut self, a: Var, spec: Arc<GatherSpec>) -> Var {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            &spec.out_shape[..],
            "scatter input shape"
        );
        let in_len: usize = spec.in_shape.iter().product();
        let mut out = vec![0.0; in_len];
        for (&i, &g) in spec.idx.iter().zip(self.nodes[a.0].value.iter()) {
            if i >= 0 {
                out[i as usize] += g;
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&spec.in_shape), out).unwrap();
        self.push(v, Op::ScatterAdd(a.0, spec))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let n: usize = shape.iter().product();
        assert_eq!(self.nodes[a.0].value.len(), n, "reshape element count");
        let flat: Vec<f64> = self.nodes[a.0].value.iter().copied().collect();
        let v = ArrayD::from_shape_vec(IxDyn(shape), flat).unwrap();
        self.push(v, Op::Reshape(a.0))
    }

    /// Concatenate 2-D blocks along axis 0. All blocks must share the column
    /// count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: empty");
        let ncols = self.nodes[parts[0].0].value.shape()[1];
        let mut rows = 0;
        for p in parts {
            let sh = self.nodes[p.0].value.shape();
            assert_eq!(sh.len(), 2, "concat_rows: 2-D blocks only");
            assert_eq!(sh[1], ncols, "concat_rows: column mismatch");
            rows += sh[0];
        }
        let mut out = Vec::with_capacity(rows * ncols);
        for p in parts {
            out.extend(self.nodes[p.0].value.iter().copied());
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[rows, ncols]), out).unwrap();
        self.push(v, Op::ConcatRows(parts.iter().map(|p| p.0).collect()))
    }

    /// Reverse-mode gradients of a scalar `loss` with respect to `wrt`.
    ///
    /// The returned vars live on this tape and are themselves differentiable.
    /// Vars not reached by the backward sweep get a zero gradient.
    pub fn grad(&mut self, loss: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "grad: loss must be scalar"
        );
        let frontier = self.nodes.len();
        let mut adj: Vec<Option<Var>> = vec![None; frontier];
        let seed_shape = self.nodes[loss.0].value.shape().to_vec();
        adj[loss.0] = Some(self.leaf(ArrayD::ones(IxDyn(&seed_shape))));

        for id in (0..frontier).rev() {
            let g = match adj[id] {
                Some(g) => g,
                None => continue,
            };
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, g);
                    self.accumulate(&mut adj, b, g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, a, g);
                    let ng = self.neg(g);
                    self.accumulate(&mut adj, b, ng);
                }
                Op::Mul(a, b) => {
                    let ga = self.mul(g, Var(b));
                    let gb = self.mul(g, Var(a));
                    self.accumulate(&mut adj, a, ga);
                    self.accumulate(&mut adj, b, gb);
                }
                Op::Scale(a, c) => {
                    let ga = self.scale(g, c);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::AddScalar(a) => self.accumulate(&mut adj, a, g),
                Op::MatMul(a, b) => {
                    let bt = self.transpose(Var(b));
                    let ga = self.matmul(g, bt);
                    let at = self.transpose(Var(a));
                    let gb = self.matmul(at, g);
                    self.accumulate(&mut adj, a, ga);
                    self.accumulate(&mut adj, b, gb);
                }
                Op::Transpose(a) => {
                    let ga = self.transpose(g);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Sigmoid(a) => {
                    // y' = y(1-y), with y the node's own output
                    let y = Var(id);
                    let yy = self.mul(y, y);
                    let d = self.sub(y, yy);
                    let ga = self.mul(g, d);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Tanh(a) => {
                    let y = Var(id);
                    let yy = self.mul(y, y);
                    let shape = self.nodes[id].value.shape().to_vec();
                    let one = self.leaf(ArrayD::ones(IxDyn(&shape)));
                    let d = self.sub(one, yy);
                    let ga = self.mul(g, d);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Exp(a) => {
                    let ga = self.mul(g, Var(id));
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Ln(a) => {
                    let r = self.recip(Var(a));
                    let ga = self.mul(g, r);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Sqrt(a) => {
                    let r = self.recip(Var(id));
                    let half = self.scale(r, 0.5);
                    let ga = self.mul(g, half);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Recip(a) => {
                    let y = Var(id);
                    let yy = self.mul(y, y);
                    let nyy = self.neg(yy);
                    let ga = self.mul(g, nyy);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Relu(a) => {
                    let mask = Arc::new(
                        self.nodes[a]
                            .value
                            .mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }),
                    );
                    let ga = self.mul_const(g, mask);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::LeakyRelu(a, alpha) => {
                    let mask =
                        Arc::new(
                            self.nodes[a]
                                .value
                                .mapv(|x| if x > 0.0 { 1.0 } else { alpha }),
                        );
                    let ga = self.mul_const(g, mask);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Abs(a) => {
                    let sign = Arc::new(self.nodes[a].value.mapv(|x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }));
                    let ga = self.mul_const(g, sign);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::ClampMin(a, c) => {
                    let mask =
                        Arc::new(self.nodes[a].value.mapv(|x| if x > c { 1.0 } else { 0.0 }));
                    let ga = self.mul_const(g, mask);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Sum(a) => {
                    let in_shape = self.nodes[a].value.shape().to_vec();
                    let n: usize = in_shape.iter().product();
                    let spec = Arc::new(GatherSpec::new(vec![0; n], in_shape, vec![1]));
                    let ga = self.gather(g, spec);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::MulConst(a, c) => {
                    let ga = self.mul_const(g, c);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Gather(a, spec) => {
                    let ga = self.scatter_add(g, spec);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::ScatterAdd(a, spec) => {
                    let ga = self.gather(g, spec);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::Reshape(a) => {
                    let in_shape = self.nodes[a].value.shape().to_vec();
                    let ga = self.reshape(g, &in_shape);
                    self.accumulate(&mut adj, a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut row = 0;
                    for p in parts {
                        let sh = self.nodes[p].value.shape().to_vec();
                        let gp = self.slice_rows_raw(g, row, sh[0], sh[1]);
                        self.accumulate(&mut adj, p, gp);
                        row += sh[0];
                    }
                }
            }
        }

        wrt.iter()
            .map(|w| match adj[w.0] {
                Some(g) => g,
                None => {
                    let shape = self.nodes[w.0].value.shape().to_vec();
                    self.zeros(&shape)
                }
            })
            .collect()
    }

    fn accumulate(&mut self, adj: &mut [Option<Var>], target: usize, g: Var) {
        adj[target] = Some(match adj[target] {
            Some(prev) => self.add(prev, g),
            None => g,
        });
    }

    fn slice_rows_raw(&mut self, a: Var, start: usize, nrows: usize, ncols: usize) -> Var {
        let in_shape = self.nodes[a.0].value.shape().to_vec();
        let idx: Vec<i64> = ((start * ncols)..((start + nrows) * ncols))
            .map(|i| i as i64)
            .collect();
        let spec = Arc::new(GatherSpec::new(idx, vec![nrows, ncols], in_shape));
        self.gather(a, spec)
    }
}
