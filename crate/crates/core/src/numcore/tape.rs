//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Operations are recorded on a [`Tape`] in execution order, which is a
//! topological order by construction. [`Tape::backward`] walks the record
//! in reverse and accumulates gradients into every node that depends on a
//! parameter or a leaf created with `requires_grad`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc};
use super::{ParamId, ParamStore, Tensor, TensorError};

/// Additive mask value written by [`Tape::masked_fill`].
pub const MASK_VALUE: f64 = -1e9;

/// Rows whose maximum is at or below this are treated as fully masked.
const MASKED_ROW_THRESHOLD: f64 = MASK_VALUE / 2.0;

const LN_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

type Result<T> = std::result::Result<T, TensorError>;

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Reshape(Var),
    Concat {
        inputs: Vec<Var>,
        lens: Vec<usize>,
        outer: usize,
        inner: usize,
    },
    Slice {
        input: Var,
        outer: usize,
        full: usize,
        start: usize,
        len: usize,
        inner: usize,
    },
    Reduce {
        input: Var,
        outer: usize,
        n: usize,
        inner: usize,
        scale: f64,
    },
    Softmax(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    MaskedFill {
        input: Var,
        keep: Vec<bool>,
    },
    Gather {
        table: Var,
        index: Vec<usize>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Dropout state: a counter-based stream so that masks depend only on the
/// seed and on how many dropout calls preceded this one.
struct DropoutStream {
    seed: u64,
    counter: u64,
}

/// Records operations for one forward/backward pass.
pub struct Tape {
    nodes: Vec<Node>,
    dropout: Option<DropoutStream>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// Evaluation-mode tape: dropout is the identity.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            dropout: None,
        }
    }

    /// Training-mode tape with dropout masks drawn from `seed`.
    pub fn training(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            dropout: Some(DropoutStream { seed, counter: 0 }),
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
        if data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op })
        }
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf input whose gradient is tracked (useful for input sensitivities).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id), true)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v) {
            &[r, c] => Ok((r, c)),
            s => Err(TensorError::RankMismatch {
                op,
                expected: 2,
                shape: s.to_vec(),
            }),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Self::check_finite(op_name, &data)?;
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, data), op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn row_broadcast(&self, op: &'static str, x: Var, r: Var) -> Result<usize> {
        let cols = *self.shape(x).last().unwrap_or(&0);
        if self.shape(r) != [cols] {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(r).to_vec(),
            });
        }
        Ok(cols)
    }

    /// `x + b` with `b` (length = last dim of `x`) broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let cols = self.row_broadcast("add_row", x, b)?;
        let bv = self.value(b).data();
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bv[i % cols])
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, data), Op::AddRow(x, b), rg))
    }

    /// `x * g` with `g` broadcast over rows.
    pub fn mul_row(&mut self, x: Var, g: Var) -> Result<Var> {
        let cols = self.row_broadcast("mul_row", x, g)?;
        let gv = self.value(g).data();
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * gv[i % cols])
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x) || self.rg(g);
        Ok(self.push(Tensor::from_parts(shape, data), Op::MulRow(x, g), rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| v * c).collect();
        Self::check_finite("scale", &data)?;
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Scale(x, c), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.dims2("transpose", x)?;
        let src = self.value(x).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(vec![c, r], data), Op::Transpose(x), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape.to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
        let outer = shape[..axis].iter().product();
        let inner = shape[axis + 1..].iter().product();
        (outer, shape[axis], inner)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or(TensorError::Empty { op: "concat" })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::RankMismatch {
                op: "concat",
                expected: axis + 1,
                shape: base,
            });
        }
        let mut lens = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            lens.push(s[axis]);
        }
        let (outer, _, inner) = Self::split_axis(&base, axis);
        let total: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &len) in inputs.iter().zip(&lens) {
                let src = self.value(v).data();
                data.extend_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::Concat {
                inputs: inputs.to_vec(),
                lens,
                outer,
                inner,
            },
            rg,
        ))
    }

    /// Takes `[start, start+len)` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(TensorError::OutOfRange { op: "slice", shape });
        }
        let (outer, full, inner) = Self::split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(out_shape, data),
            Op::Slice {
                input: x,
                outer,
                full,
                start,
                len,
                inner,
            },
            rg,
        ))
    }

    fn reduce(&mut self, x: Var, axis: usize, mean: bool) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::RankMismatch {
                op: "reduce",
                expected: axis + 1,
                shape,
            });
        }
        let (outer, n, inner) = Self::split_axis(&shape, axis);
        let scale = if mean { 1.0 / n as f64 } else { 1.0 };
        let src = self.value(x).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let row = &src[(o * n + k) * inner..(o * n + k + 1) * inner];
                for (d, &v) in data[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        if mean {
            data.iter_mut().for_each(|v| *v *= scale);
        }
        let mut out_shape: Vec<usize> = shape
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &d)| d)
            .collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(out_shape, data),
            Op::Reduce {
                input: x,
                outer,
                n,
                inner,
                scale,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce(x, axis, false)
    }

    pub fn mean(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce(x, axis, true)
    }

    /// Sum of every element, as a scalar of shape `[1]`.
    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let flat = self.reshape(x, &[n])?;
        self.sum(flat, 0)
    }

    /// Softmax over the last axis. Errors on rows that are entirely masked.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().ok_or(TensorError::Empty { op: "softmax" })?;
        let src = self.value(x).data();
        let mut data = vec![0.0; src.len()];
        for (row, out) in src.chunks(cols).zip(data.chunks_mut(cols)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max <= MASKED_ROW_THRESHOLD {
                return Err(TensorError::AllMaskedRow);
            }
            let mut z = 0.0;
            for (o, &v) in out.iter_mut().zip(row) {
                *o = (v - max).exp();
                z += *o;
            }
            out.iter_mut().for_each(|o| *o /= z);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Softmax(x), rg))
    }

    /// Exact GELU, `x·Φ(x)`.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| gelu(v)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Gelu(x), rg))
    }

    /// Layer normalization over the last axis followed by the affine map
    /// `γ·x̂ + β`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let cols = self.row_broadcast("layer_norm", x, gamma)?;
        self.row_broadcast("layer_norm", x, beta)?;
        let src = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let rows = src.len() / cols;
        let mut xhat = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let mu = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = is;
            for c in 0..cols {
                let xh = (row[c] - mu) * is;
                xhat[r * cols + c] = xh;
                out[r * cols + c] = g[c] * xh + b[c];
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Inverted dropout. Identity on evaluation tapes or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArgument(
                "dropout probability must be in [0, 1)",
            ));
        }
        let Some(stream) = self.dropout.as_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream.seed);
        rng.set_stream(stream.counter);
        stream.counter += 1;
        let keep_scale = 1.0 / (1.0 - p);
        let n = self.value(x).numel();
        let mask: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() >= p {
                    keep_scale
                } else {
                    0.0
                }
            })
            .collect();
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::Dropout { input: x, mask },
            rg,
        ))
    }

    /// Replaces entries where `keep` is false with [`MASK_VALUE`].
    pub fn masked_fill(&mut self, x: Var, keep: &[bool]) -> Result<Var> {
        if keep.len() != self.value(x).numel() {
            return Err(TensorError::ShapeMismatch {
                op: "masked_fill",
                lhs: self.shape(x).to_vec(),
                rhs: vec![keep.len()],
            });
        }
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .zip(keep)
            .map(|(&v, &k)| if k { v } else { MASK_VALUE })
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::MaskedFill {
                input: x,
                keep: keep.to_vec(),
            },
            rg,
        ))
    }

    /// `out[i] = table[index[i]]`, shaped as `shape`.
    pub fn gather(&mut self, table: Var, index: &[usize], shape: &[usize]) -> Result<Var> {
        let t = self.value(table).data();
        if index.len() != shape.iter().product::<usize>() {
            return Err(TensorError::LengthMismatch {
                shape: shape.to_vec(),
                len: index.len(),
            });
        }
        if index.iter().any(|&i| i >= t.len()) {
            return Err(TensorError::OutOfRange {
                op: "gather",
                shape: self.shape(table).to_vec(),
            });
        }
        let data: Vec<f64> = index.iter().map(|&i| t[i]).collect();
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::from_parts(shape.to_vec(), data),
            Op::Gather {
                table,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    /// Nodes that do not require grad (or are not upstream of `loss`)
    /// get `None`.
    pub fn grad_all(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>> {
        if self.value(loss).numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape(loss).to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    /// Accumulates parameter gradients of `loss` into `acc` (indexed by
    /// [`ParamId`]).
    pub fn backward_into(&self, loss: Var, acc: &mut [Tensor]) -> Result<()> {
        let grads = self.grad_all(loss)?;
        for (node, g) in self.nodes.iter().zip(grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                for (a, v) in acc[id.0].data_mut().iter_mut().zip(g) {
                    *a += v;
                }
            }
        }
        Ok(())
    }

    /// Parameter gradients of `loss`; parameters off the path get zeros.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Vec<Tensor>> {
        let mut acc = store.zeros_like();
        self.backward_into(loss, &mut acc)?;
        Ok(acc)
    }

    fn accumulate(
        grads: &mut [Option<Vec<f64>>],
        target: Var,
        len: usize,
        f: impl FnOnce(&mut [f64]),
    ) {
        let slot = grads[target.0].get_or_insert_with(|| vec![0.0; len]);
        f(slot);
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let numel = |v: Var| self.nodes[v.0].value.numel();
        let val = |v: Var| self.nodes[v.0].value.data();
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.nodes[a.0].value.dims2().expect("rank 2");
                let n = self.nodes[b.0].value.shape()[1];
                if self.rg(*a) {
                    Self::accumulate(grads, *a, m * k, |acc| {
                        matmul_nt_acc(g, val(*b), acc, m, k, n)
                    });
                }
                if self.rg(*b) {
                    Self::accumulate(grads, *b, k * n, |acc| {
                        matmul_tn_acc(val(*a), g, acc, m, k, n)
                    });
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(self.nodes[i].op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                if self.rg(*a) {
                    Self::accumulate(grads, *a, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                    });
                }
                if self.rg(*b) {
                    Self::accumulate(grads, *b, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(x, y)| *x += sign * y)
                    });
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let bv = val(*b);
                    Self::accumulate(grads, *a, g.len(), |acc| {
                        for ((x, gy), bb) in acc.iter_mut().zip(g).zip(bv) {
                            *x += gy * bb;
                        }
                    });
                }
                if self.rg(*b) {
                    let av = val(*a);
                    Self::accumulate(grads, *b, g.len(), |acc| {
                        for ((x, gy), aa) in acc.iter_mut().zip(g).zip(av) {
                            *x += gy * aa;
                        }
                    });
                }
            }
            Op::AddRow(x, b) => {
                let cols = numel(*b);
                if self.rg(*x) {
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(s, y)| *s += y)
                    });
                }
                if self.rg(*b) {
                    Self::accumulate(grads, *b, cols, |acc| {
                        for (j, gy) in g.iter().enumerate() {
                            acc[j % cols] += gy;
                        }
                    });
                }
            }
            Op::MulRow(x, w) => {
                let cols = numel(*w);
                if self.rg(*x) {
                    let wv = val(*w);
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        for (j, (s, gy)) in acc.iter_mut().zip(g).enumerate() {
                            *s += gy * wv[j % cols];
                        }
                    });
                }
                if self.rg(*w) {
                    let xv = val(*x);
                    Self::accumulate(grads, *w, cols, |acc| {
                        for (j, (gy, xx)) in g.iter().zip(xv).enumerate() {
                            acc[j % cols] += gy * xx;
                        }
                    });
                }
            }
            Op::Scale(x, c) => {
                if self.rg(*x) {
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(s, y)| *s += c * y)
                    });
                }
            }
            Op::Transpose(x) => {
                if self.rg(*x) {
                    let (r, c) = self.nodes[x.0].value.dims2().expect("rank 2");
                    Self::accumulate(grads, *x, r * c, |acc| {
                        for ii in 0..r {
                            for jj in 0..c {
                                acc[ii * c + jj] += g[jj * r + ii];
                            }
                        }
                    });
                }
            }
            Op::Reshape(x) => {
                if self.rg(*x) {
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(s, y)| *s += y)
                    });
                }
            }
            Op::Concat {
                inputs,
                lens,
                outer,
                inner,
            } => {
                let total: usize = lens.iter().sum();
                let mut offset = 0;
                for (&v, &len) in inputs.iter().zip(lens) {
                    if self.rg(v) {
                        Self::accumulate(grads, v, outer * len * inner, |acc| {
                            for o in 0..*outer {
                                let src = &g[(o * total + offset) * inner
                                    ..(o * total + offset + len) * inner];
                                for (s, y) in acc[o * len * inner..(o + 1) * len * inner]
                                    .iter_mut()
                                    .zip(src)
                                {
                                    *s += y;
                                }
                            }
                        });
                    }
                    offset += len;
                }
            }
            Op::Slice {
                input,
                outer,
                full,
                start,
                len,
                inner,
            } => {
                if self.rg(*input) {
                    Self::accumulate(grads, *input, outer * full * inner, |acc| {
                        for o in 0..*outer {
                            let base = (o * full + start) * inner;
                            let src = &g[o * len * inner..(o + 1) * len * inner];
                            for (s, y) in acc[base..base + len * inner].iter_mut().zip(src) {
                                *s += y;
                            }
                        }
                    });
                }
            }
            Op::Reduce {
                input,
                outer,
                n,
                inner,
                scale,
            } => {
                if self.rg(*input) {
                    Self::accumulate(grads, *input, outer * n * inner, |acc| {
                        for o in 0..*outer {
                            let src = &g[o * inner..(o + 1) * inner];
                            for k in 0..*n {
                                let dst = &mut acc[(o * n + k) * inner..(o * n + k + 1) * inner];
                                for (s, y) in dst.iter_mut().zip(src) {
                                    *s += scale * y;
                                }
                            }
                        }
                    });
                }
            }
            Op::Softmax(x) => {
                if self.rg(*x) {
                    let y = self.nodes[i].value.data();
                    let cols = *self.nodes[i].value.shape().last().expect("rank >= 1");
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        for ((yr, gr), ar) in
                            y.chunks(cols).zip(g.chunks(cols)).zip(acc.chunks_mut(cols))
                        {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for ((s, &yy), &gy) in ar.iter_mut().zip(yr).zip(gr) {
                                *s += yy * (gy - dot);
                            }
                        }
                    });
                }
            }
            Op::Gelu(x) => {
                if self.rg(*x) {
                    let xv = val(*x);
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        for ((s, &gy), &xx) in acc.iter_mut().zip(g).zip(xv) {
                            *s += gy * gelu_grad(xx);
                        }
                    });
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let cols = numel(*gamma);
                let gv = val(*gamma);
                if self.rg(*gamma) {
                    Self::accumulate(grads, *gamma, cols, |acc| {
                        for (j, (gy, xh)) in g.iter().zip(xhat).enumerate() {
                            acc[j % cols] += gy * xh;
                        }
                    });
                }
                if self.rg(*beta) {
                    Self::accumulate(grads, *beta, cols, |acc| {
                        for (j, gy) in g.iter().enumerate() {
                            acc[j % cols] += gy;
                        }
                    });
                }
                if self.rg(*x) {
                    Self::accumulate(grads, *x, g.len(), |acc| {
                        let mut dxhat = vec![0.0; cols];
                        for (r, &is) in inv_std.iter().enumerate() {
                            let gr = &g[r * cols..(r + 1) * cols];
                            let xr = &xhat[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dxhat[c] = gr[c] * gv[c];
                            }
                            let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                            let mean_dx =
                                dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                            for c in 0..cols {
                                acc[r * cols + c] += is * (dxhat[c] - mean_d - xr[c] * mean_dx);
                            }
                        }
                    });
                }
            }
            Op::Dropout { input, mask } => {
                if self.rg(*input) {
                    Self::accumulate(grads, *input, g.len(), |acc| {
                        for ((s, gy), m) in acc.iter_mut().zip(g).zip(mask) {
                            *s += gy * m;
                        }
                    });
                }
            }
            Op::MaskedFill { input, keep } => {
                if self.rg(*input) {
                    Self::accumulate(grads, *input, g.len(), |acc| {
                        for ((s, gy), &k) in acc.iter_mut().zip(g).zip(keep) {
                            if k {
                                *s += gy;
                            }
                        }
                    });
                }
            }
            Op::Gather { table, index } => {
                if self.rg(*table) {
                    Self::accumulate(grads, *table, numel(*table), |acc| {
                        for (gy, &ix) in g.iter().zip(index) {
                            acc[ix] += gy;
                        }
                    });
                }
            }
        }
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}
