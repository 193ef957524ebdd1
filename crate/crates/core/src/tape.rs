//! Define-by-run reverse-mode autodiff over a Wengert tape.
//!
//! Every operation appends one node to the [`Tape`] and returns a [`VarId`]
//! handle; inputs are recorded before the nodes that consume them, so the tape
//! order is already topological.  [`Tape::backward`] walks the tape once in
//! reverse, accumulating gradients additively into every variable that
//! requires them, and may run only once per tape — rebuild the tape to
//! differentiate again.

use crate::tensor::{
    broadcast_binary, broadcast_shapes, broadcast_strides, reduce_to_shape, strides_for, Tensor,
    TensorError,
};

/// Handle to a variable recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

// ─── Recorded operations ─────────────────────────────────────────────────────

enum Node {
    Leaf,
    Add { a: VarId, b: VarId },
    Sub { a: VarId, b: VarId },
    Mul { a: VarId, b: VarId },
    Div { a: VarId, b: VarId },
    AddScalar { a: VarId },
    MulScalar { a: VarId, factor: f64 },
    Matmul { a: VarId, b: VarId },
    Transpose { a: VarId, perm: Vec<usize> },
    Reshape { a: VarId },
    Concat { parts: Vec<VarId>, axis: usize },
    Slice { a: VarId, axis: usize, start: usize },
    SumAxis { a: VarId, axis: usize },
    MeanAxis { a: VarId, axis: usize },
    SumAll { a: VarId },
    MeanAll { a: VarId },
    SoftmaxLast { a: VarId },
    LogSumExpLast { a: VarId },
    LayerNorm {
        x: VarId,
        gain: VarId,
        bias: VarId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu { a: VarId },
    Exp { a: VarId },
    Log { a: VarId },
    ClampMin { a: VarId, floor: f64 },
}

// ─── Matmul kernels ──────────────────────────────────────────────────────────

/// C[m,n] += A[m,k] · B[k,n]
fn mm_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// C[m,n] += A[m,k] · B[n,k]ᵀ  (second operand stored transposed)
fn mm_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for kk in 0..k {
                acc += arow[kk] * brow[kk];
            }
            crow[j] += acc;
        }
    }
}

/// C[m,n] += A[k,m]ᵀ · B[k,n]  (first operand stored transposed)
fn mm_tn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for i in 0..m {
            let av = arow[i];
            let crow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Kern {
    NN,
    NT,
    TN,
}

/// Runs a 2-D kernel over every batch cell of `loop_batch`, resolving each
/// operand's cell through broadcast strides.  Kernels accumulate, so operands
/// with stride-0 batch dims receive the sum over the broadcast automatically.
#[allow(clippy::too_many_arguments)]
fn batched_mm(
    kern: Kern,
    loop_batch: &[usize],
    a: &[f64],
    a_batch: &[usize],
    a_cell: usize,
    b: &[f64],
    b_batch: &[usize],
    b_cell: usize,
    out: &mut [f64],
    o_batch: &[usize],
    o_cell: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    let cells: usize = loop_batch.iter().product();
    let astr: Vec<usize> = broadcast_strides(a_batch, loop_batch)
        .iter()
        .map(|s| s * a_cell)
        .collect();
    let bstr: Vec<usize> = broadcast_strides(b_batch, loop_batch)
        .iter()
        .map(|s| s * b_cell)
        .collect();
    let ostr: Vec<usize> = broadcast_strides(o_batch, loop_batch)
        .iter()
        .map(|s| s * o_cell)
        .collect();
    let rank = loop_batch.len();
    let mut coords = vec![0usize; rank];
    let (mut ao, mut bo, mut oo) = (0usize, 0usize, 0usize);
    for _ in 0..cells {
        let av = &a[ao..ao + a_cell];
        let bv = &b[bo..bo + b_cell];
        let ov = &mut out[oo..oo + o_cell];
        match kern {
            Kern::NN => mm_nn(av, bv, ov, m, k, n),
            Kern::NT => mm_nt(av, bv, ov, m, k, n),
            Kern::TN => mm_tn(av, bv, ov, m, k, n),
        }
        for d in (0..rank).rev() {
            coords[d] += 1;
            ao += astr[d];
            bo += bstr[d];
            oo += ostr[d];
            if coords[d] < loop_batch[d] {
                break;
            }
            coords[d] = 0;
            ao -= astr[d] * loop_batch[d];
            bo -= bstr[d] * loop_batch[d];
            oo -= ostr[d] * loop_batch[d];
        }
    }
}

/// outer × axis × inner decomposition used by axis-wise ops.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn shape_without_axis(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape.to_vec();
    out.remove(axis);
    if out.is_empty() {
        out.push(1);
    }
    out
}

const GELU_COEF: f64 = 0.044715;

fn gelu_value(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + GELU_COEF * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + GELU_COEF * x * x * x);
    let t = u.tanh();
    let du = c * (1.0 + 3.0 * GELU_COEF * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

// ─── Tape ────────────────────────────────────────────────────────────────────

/// A forward-pass recording: values, the ops that produced them, and — after
/// [`Tape::backward`] — gradients on every variable that requires them.
#[derive(Default)]
pub struct Tape {
    vals: Vec<Tensor>,
    nodes: Vec<Node>,
    requires: Vec<bool>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    /// Number of variables recorded so far.
    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Records a copy of `t` as a leaf; its `requires_grad` flag decides
    /// whether backward will produce a gradient for it.
    pub fn leaf(&mut self, t: &Tensor) -> VarId {
        let requires = t.requires_grad;
        self.push(t.clone(), Node::Leaf, requires)
    }

    /// Records an all-zero constant leaf (no gradient).
    pub fn zeros(&mut self, shape: Vec<usize>) -> VarId {
        self.push(Tensor::zeros(shape), Node::Leaf, false)
    }

    /// Value of a recorded variable.
    pub fn value(&self, id: VarId) -> &Tensor {
        &self.vals[id.0]
    }

    /// Gradient of the loss with respect to a variable, if backward produced
    /// one.
    pub fn grad(&self, id: VarId) -> Option<&[f64]> {
        self.vals[id.0].grad.as_deref()
    }

    fn push(&mut self, t: Tensor, node: Node, requires: bool) -> VarId {
        self.vals.push(t);
        self.nodes.push(node);
        self.requires.push(requires);
        VarId(self.vals.len() - 1)
    }

    fn req(&self, ids: &[VarId]) -> bool {
        ids.iter().any(|id| self.requires[id.0])
    }

    // ─── Elementwise and scalar ops ──────────────────────────────────────────

    fn binary(
        &mut self,
        op: &'static str,
        a: VarId,
        b: VarId,
        f: impl Fn(f64, f64) -> f64,
        node: Node,
    ) -> Result<VarId, TensorError> {
        let out_shape = broadcast_shapes(op, self.vals[a.0].shape(), self.vals[b.0].shape())?;
        let data = broadcast_binary(
            self.vals[a.0].data(),
            self.vals[a.0].shape(),
            self.vals[b.0].data(),
            self.vals[b.0].shape(),
            &out_shape,
            f,
        );
        let t = Tensor::new(out_shape, data)?;
        let requires = self.req(&[a, b]);
        Ok(self.push(t, node, requires))
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId, TensorError> {
        self.binary("add", a, b, |x, y| x + y, Node::Add { a, b })
    }

    /// Elementwise difference with broadcasting.
    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId, TensorError> {
        self.binary("sub", a, b, |x, y| x - y, Node::Sub { a, b })
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId, TensorError> {
        self.binary("mul", a, b, |x, y| x * y, Node::Mul { a, b })
    }

    /// Elementwise quotient with broadcasting.
    pub fn div(&mut self, a: VarId, b: VarId) -> Result<VarId, TensorError> {
        self.binary("div", a, b, |x, y| x / y, Node::Div { a, b })
    }

    /// Adds a scalar to every element.
    pub fn add_scalar(&mut self, a: VarId, c: f64) -> Result<VarId, TensorError> {
        let t = Tensor::new(
            self.vals[a.0].shape().to_vec(),
            self.vals[a.0].data().iter().map(|v| v + c).collect(),
        )?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::AddScalar { a }, requires))
    }

    /// Multiplies every element by a scalar.
    pub fn mul_scalar(&mut self, a: VarId, c: f64) -> Result<VarId, TensorError> {
        let t = Tensor::new(
            self.vals[a.0].shape().to_vec(),
            self.vals[a.0].data().iter().map(|v| v * c).collect(),
        )?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::MulScalar { a, factor: c }, requires))
    }

    fn unary(
        &mut self,
        f: impl Fn(f64) -> f64,
        a: VarId,
        node: Node,
    ) -> Result<VarId, TensorError> {
        let t = Tensor::new(
            self.vals[a.0].shape().to_vec(),
            self.vals[a.0].data().iter().map(|&v| f(v)).collect(),
        )?;
        let requires = self.requires[a.0];
        Ok(self.push(t, node, requires))
    }

    /// Gaussian error linear unit (tanh approximation).
    pub fn gelu(&mut self, a: VarId) -> Result<VarId, TensorError> {
        self.unary(gelu_value, a, Node::Gelu { a })
    }

    /// Elementwise natural exponential.
    pub fn exp(&mut self, a: VarId) -> Result<VarId, TensorError> {
        self.unary(f64::exp, a, Node::Exp { a })
    }

    /// Elementwise natural logarithm; rejects non-positive inputs.
    pub fn log(&mut self, a: VarId) -> Result<VarId, TensorError> {
        if self.vals[a.0].data().iter().any(|&v| v <= 0.0) {
            return Err(TensorError::NumericDomain {
                op: "log",
                message: "input contains a non-positive value".to_string(),
            });
        }
        self.unary(f64::ln, a, Node::Log { a })
    }

    /// Elementwise lower clamp: `max(x, floor)`.
    pub fn clamp_min(&mut self, a: VarId, floor: f64) -> Result<VarId, TensorError> {
        self.unary(|v| v.max(floor), a, Node::ClampMin { a, floor })
    }

    // ─── Linear algebra ──────────────────────────────────────────────────────

    /// Matrix product over the last two axes with broadcast batch dims.
    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId, TensorError> {
        let ash = self.vals[a.0].shape().to_vec();
        let bsh = self.vals[b.0].shape().to_vec();
        if ash.len() < 2 || bsh.len() < 2 {
            return Err(TensorError::InvalidArgument {
                op: "matmul",
                message: format!("operands must have rank >= 2, got {ash:?} and {bsh:?}"),
            });
        }
        let (m, ka) = (ash[ash.len() - 2], ash[ash.len() - 1]);
        let (kb, n) = (bsh[bsh.len() - 2], bsh[bsh.len() - 1]);
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: ash,
                rhs: bsh,
            });
        }
        let a_batch = &ash[..ash.len() - 2];
        let b_batch = &bsh[..bsh.len() - 2];
        let batch = broadcast_shapes("matmul", a_batch, b_batch)?;
        let mut out_shape = batch.clone();
        out_shape.push(m);
        out_shape.push(n);
        let numel: usize = out_shape.iter().product();
        let mut data = vec![0.0; numel];
        batched_mm(
            Kern::NN,
            &batch,
            self.vals[a.0].data(),
            a_batch,
            m * ka,
            self.vals[b.0].data(),
            b_batch,
            kb * n,
            &mut data,
            &batch,
            m * n,
            m,
            ka,
            n,
        );
        let t = Tensor::new(out_shape, data)?;
        let requires = self.req(&[a, b]);
        Ok(self.push(t, Node::Matmul { a, b }, requires))
    }

    /// Axis permutation; `perm[d]` names the input axis that becomes output
    /// axis `d`.
    pub fn transpose(&mut self, a: VarId, perm: &[usize]) -> Result<VarId, TensorError> {
        let shape = self.vals[a.0].shape().to_vec();
        let rank = shape.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::InvalidArgument {
                op: "transpose",
                message: format!("{perm:?} is not a permutation of axes for shape {shape:?}"),
            });
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let out_strides = strides_for(&out_shape);
        // Stride contributed to the output offset by each *input* axis.
        let mut contrib = vec![0usize; rank];
        for d in 0..rank {
            contrib[perm[d]] = out_strides[d];
        }
        let src = self.vals[a.0].data();
        let mut data = vec![0.0; src.len()];
        let mut coords = vec![0usize; rank];
        let mut out_off = 0usize;
        for &v in src {
            data[out_off] = v;
            for d in (0..rank).rev() {
                coords[d] += 1;
                out_off += contrib[d];
                if coords[d] < shape[d] {
                    break;
                }
                coords[d] = 0;
                out_off -= contrib[d] * shape[d];
            }
        }
        let t = Tensor::new(out_shape, data)?;
        let requires = self.requires[a.0];
        Ok(self.push(
            t,
            Node::Transpose {
                a,
                perm: perm.to_vec(),
            },
            requires,
        ))
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(&mut self, a: VarId, shape: Vec<usize>) -> Result<VarId, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != self.vals[a.0].numel() {
            return Err(TensorError::InvalidArgument {
                op: "reshape",
                message: format!(
                    "cannot view {:?} ({} elements) as {shape:?} ({numel} elements)",
                    self.vals[a.0].shape(),
                    self.vals[a.0].numel()
                ),
            });
        }
        let t = Tensor::new(shape, self.vals[a.0].data().to_vec())?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::Reshape { a }, requires))
    }

    /// Concatenates tensors along `axis`; all other dims must match.
    pub fn concat(&mut self, parts: &[VarId], axis: usize) -> Result<VarId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                message: "at least one input is required".to_string(),
            });
        }
        let first = self.vals[parts[0].0].shape().to_vec();
        if axis >= first.len() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                message: format!("axis {axis} out of range for shape {first:?}"),
            });
        }
        let mut axis_total = 0usize;
        for &p in parts {
            let s = self.vals[p.0].shape();
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(d, (&x, &y))| d != axis && x != y)
            {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let (outer, _, inner) = axis_split(&out_shape, axis);
        let mut data = vec![0.0; out_shape.iter().product()];
        for o in 0..outer {
            let mut written = 0usize;
            for &p in parts {
                let s = self.vals[p.0].shape();
                let len_p = s[axis];
                let src = self.vals[p.0].data();
                let src_block = &src[o * len_p * inner..(o + 1) * len_p * inner];
                let dst_start = o * axis_total * inner + written * inner;
                data[dst_start..dst_start + len_p * inner].copy_from_slice(src_block);
                written += len_p;
            }
        }
        let t = Tensor::new(out_shape, data)?;
        let requires = self.req(parts);
        Ok(self.push(
            t,
            Node::Concat {
                parts: parts.to_vec(),
                axis,
            },
            requires,
        ))
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn slice(
        &mut self,
        a: VarId,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<VarId, TensorError> {
        let shape = self.vals[a.0].shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidArgument {
                op: "slice",
                message: format!("axis {axis} out of range for shape {shape:?}"),
            });
        }
        if len == 0 || start + len > shape[axis] {
            return Err(TensorError::InvalidArgument {
                op: "slice",
                message: format!(
                    "range {start}..{} out of bounds for axis of length {}",
                    start + len,
                    shape[axis]
                ),
            });
        }
        let (outer, axis_len, inner) = axis_split(&shape, axis);
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let src = self.vals[a.0].data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * axis_len * inner + start * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let t = Tensor::new(out_shape, data)?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::Slice { a, axis, start }, requires))
    }

    // ─── Reductions ──────────────────────────────────────────────────────────

    fn check_axis(&self, op: &'static str, a: VarId, axis: usize) -> Result<(), TensorError> {
        let shape = self.vals[a.0].shape();
        if axis >= shape.len() {
            return Err(TensorError::InvalidArgument {
                op,
                message: format!("axis {axis} out of range for shape {shape:?}"),
            });
        }
        Ok(())
    }

    /// Sum over one axis; the axis is removed (a rank-1 input yields `[1]`).
    pub fn sum_axis(&mut self, a: VarId, axis: usize) -> Result<VarId, TensorError> {
        self.check_axis("sum_axis", a, axis)?;
        let shape = self.vals[a.0].shape().to_vec();
        let (outer, axis_len, inner) = axis_split(&shape, axis);
        let src = self.vals[a.0].data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..axis_len {
                let base = o * axis_len * inner + j * inner;
                for i in 0..inner {
                    data[o * inner + i] += src[base + i];
                }
            }
        }
        let t = Tensor::new(shape_without_axis(&shape, axis), data)?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::SumAxis { a, axis }, requires))
    }

    /// Mean over one axis; the axis is removed (a rank-1 input yields `[1]`).
    pub fn mean_axis(&mut self, a: VarId, axis: usize) -> Result<VarId, TensorError> {
        self.check_axis("mean_axis", a, axis)?;
        let shape = self.vals[a.0].shape().to_vec();
        let (outer, axis_len, inner) = axis_split(&shape, axis);
        let src = self.vals[a.0].data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..axis_len {
                let base = o * axis_len * inner + j * inner;
                for i in 0..inner {
                    data[o * inner + i] += src[base + i];
                }
            }
        }
        for v in data.iter_mut() {
            *v /= axis_len as f64;
        }
        let t = Tensor::new(shape_without_axis(&shape, axis), data)?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::MeanAxis { a, axis }, requires))
    }

    /// Sum of all elements, as shape `[1]`.
    pub fn sum_all(&mut self, a: VarId) -> Result<VarId, TensorError> {
        let total: f64 = self.vals[a.0].data().iter().sum();
        let requires = self.requires[a.0];
        Ok(self.push(Tensor::scalar(total), Node::SumAll { a }, requires))
    }

    /// Mean of all elements, as shape `[1]`.
    pub fn mean_all(&mut self, a: VarId) -> Result<VarId, TensorError> {
        let n = self.vals[a.0].numel() as f64;
        let total: f64 = self.vals[a.0].data().iter().sum();
        let requires = self.requires[a.0];
        Ok(self.push(Tensor::scalar(total / n), Node::MeanAll { a }, requires))
    }

    // ─── Softmax family ──────────────────────────────────────────────────────

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax_last_axis(&mut self, a: VarId) -> Result<VarId, TensorError> {
        let shape = self.vals[a.0].shape().to_vec();
        let last = *shape.last().expect("tensors have rank >= 1");
        let src = self.vals[a.0].data();
        let mut data = vec![0.0; src.len()];
        for (row_in, row_out) in src.chunks_exact(last).zip(data.chunks_exact_mut(last)) {
            let m = row_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &x) in row_out.iter_mut().zip(row_in) {
                *o = (x - m).exp();
                sum += *o;
            }
            for o in row_out.iter_mut() {
                *o /= sum;
            }
        }
        let t = Tensor::new(shape, data)?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::SoftmaxLast { a }, requires))
    }

    /// log(Σ exp) over the last axis, computed with max subtraction; the axis
    /// is removed (a rank-1 input yields `[1]`).
    pub fn logsumexp_last_axis(&mut self, a: VarId) -> Result<VarId, TensorError> {
        let shape = self.vals[a.0].shape().to_vec();
        let last = *shape.last().expect("tensors have rank >= 1");
        let src = self.vals[a.0].data();
        let mut data = Vec::with_capacity(src.len() / last);
        for row in src.chunks_exact(last) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
            // A single-element row comes back exactly as its value.
            data.push(if last == 1 { row[0] } else { m + sum.ln() });
        }
        let out_shape = shape_without_axis(&shape, shape.len() - 1);
        let t = Tensor::new(out_shape, data)?;
        let requires = self.requires[a.0];
        Ok(self.push(t, Node::LogSumExpLast { a }, requires))
    }

    /// Layer normalization over the last axis with learnable gain and bias
    /// (both shaped `[last]`).
    pub fn layernorm(
        &mut self,
        x: VarId,
        gain: VarId,
        bias: VarId,
        eps: f64,
    ) -> Result<VarId, TensorError> {
        if eps <= 0.0 {
            return Err(TensorError::InvalidArgument {
                op: "layernorm",
                message: format!("eps must be positive, got {eps}"),
            });
        }
        let shape = self.vals[x.0].shape().to_vec();
        let last = *shape.last().expect("tensors have rank >= 1");
        for (name, id) in [("gain", gain), ("bias", bias)] {
            if self.vals[id.0].shape() != [last] {
                return Err(TensorError::InvalidArgument {
                    op: "layernorm",
                    message: format!(
                        "{name} must have shape [{last}], got {:?}",
                        self.vals[id.0].shape()
                    ),
                });
            }
        }
        let src = self.vals[x.0].data();
        let g = self.vals[gain.0].data().to_vec();
        let b = self.vals[bias.0].data().to_vec();
        let rows = src.len() / last;
        let mut xhat = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut data = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * last..(r + 1) * last];
            let mean: f64 = row.iter().sum::<f64>() / last as f64;
            let var: f64 = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / last as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for i in 0..last {
                let xh = (row[i] - mean) * is;
                xhat[r * last + i] = xh;
                data[r * last + i] = g[i] * xh + b[i];
            }
        }
        let t = Tensor::new(shape, data)?;
        let requires = self.req(&[x, gain, bias]);
        Ok(self.push(
            t,
            Node::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            requires,
        ))
    }

    // ─── Backward ────────────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss.  Populates `grad` on every variable
    /// with `requires_grad`, accumulating additively where a variable feeds
    /// several consumers.  May be called once per tape.
    pub fn backward(&mut self, loss: VarId) -> Result<(), TensorError> {
        if self.backward_done {
            return Err(TensorError::Contract {
                message: "backward was already run on this tape; build a new forward pass first"
                    .to_string(),
            });
        }
        if self.vals[loss.0].numel() != 1 {
            return Err(TensorError::Contract {
                message: format!(
                    "backward requires a scalar loss, got shape {:?}",
                    self.vals[loss.0].shape()
                ),
            });
        }
        let n = self.vals.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..n).rev() {
            if grads[id].is_none() || !self.requires[id] {
                continue;
            }
            if matches!(self.nodes[id], Node::Leaf) {
                continue;
            }
            let dy = grads[id].take().expect("checked above");
            self.propagate(id, &dy, &mut grads);
            grads[id] = Some(dy);
        }
        for (i, g) in grads.into_iter().enumerate() {
            if self.requires[i] {
                self.vals[i].grad = g;
            }
        }
        self.backward_done = true;
        Ok(())
    }

    fn accum_into<'g>(
        grads: &'g mut [Option<Vec<f64>>],
        id: VarId,
        numel: usize,
    ) -> &'g mut [f64] {
        grads[id.0].get_or_insert_with(|| vec![0.0; numel])
    }

    fn add_reduced(&self, grads: &mut [Option<Vec<f64>>], id: VarId, dy_like: &[f64], from: &[usize]) {
        if !self.requires[id.0] {
            return;
        }
        let to = self.vals[id.0].shape();
        let reduced = reduce_to_shape(dy_like, from, to);
        let slot = Self::accum_into(grads, id, self.vals[id.0].numel());
        for (s, v) in slot.iter_mut().zip(reduced) {
            *s += v;
        }
    }

    fn propagate(&self, id: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out_shape = self.vals[id].shape().to_vec();
        match &self.nodes[id] {
            Node::Leaf => {}
            Node::Add { a, b } => {
                self.add_reduced(grads, *a, dy, &out_shape);
                self.add_reduced(grads, *b, dy, &out_shape);
            }
            Node::Sub { a, b } => {
                self.add_reduced(grads, *a, dy, &out_shape);
                if self.requires[b.0] {
                    let neg: Vec<f64> = dy.iter().map(|v| -v).collect();
                    self.add_reduced(grads, *b, &neg, &out_shape);
                }
            }
            Node::Mul { a, b } => {
                if self.requires[a.0] {
                    let contrib = broadcast_binary(
                        dy,
                        &out_shape,
                        self.vals[b.0].data(),
                        self.vals[b.0].shape(),
                        &out_shape,
                        |g, y| g * y,
                    );
                    self.add_reduced(grads, *a, &contrib, &out_shape);
                }
                if self.requires[b.0] {
                    let contrib = broadcast_binary(
                        dy,
                        &out_shape,
                        self.vals[a.0].data(),
                        self.vals[a.0].shape(),
                        &out_shape,
                        |g, x| g * x,
                    );
                    self.add_reduced(grads, *b, &contrib, &out_shape);
                }
            }
            Node::Div { a, b } => {
                if self.requires[a.0] {
                    let contrib = broadcast_binary(
                        dy,
                        &out_shape,
                        self.vals[b.0].data(),
                        self.vals[b.0].shape(),
                        &out_shape,
                        |g, y| g / y,
                    );
                    self.add_reduced(grads, *a, &contrib, &out_shape);
                }
                if self.requires[b.0] {
                    // d(a/b)/db = -a / b²; fold a and b in via the forward value.
                    let quotient = self.vals[id].data();
                    let with_q: Vec<f64> = dy.iter().zip(quotient).map(|(g, q)| g * q).collect();
                    let contrib = broadcast_binary(
                        &with_q,
                        &out_shape,
                        self.vals[b.0].data(),
                        self.vals[b.0].shape(),
                        &out_shape,
                        |gq, y| -gq / y,
                    );
                    self.add_reduced(grads, *b, &contrib, &out_shape);
                }
            }
            Node::AddScalar { a } => {
                self.add_reduced(grads, *a, dy, &out_shape);
            }
            Node::MulScalar { a, factor } => {
                if self.requires[a.0] {
                    let contrib: Vec<f64> = dy.iter().map(|v| v * factor).collect();
                    self.add_reduced(grads, *a, &contrib, &out_shape);
                }
            }
            Node::Matmul { a, b } => {
                let ash = self.vals[a.0].shape();
                let bsh = self.vals[b.0].shape();
                let (m, k) = (ash[ash.len() - 2], ash[ash.len() - 1]);
                let n = bsh[bsh.len() - 1];
                let batch = &out_shape[..out_shape.len() - 2];
                let a_batch = ash[..ash.len() - 2].to_vec();
                let b_batch = bsh[..bsh.len() - 2].to_vec();
                if self.requires[a.0] {
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    // dA[m,k] += dY[m,n] · B[k,n]ᵀ
                    batched_mm(
                        Kern::NT,
                        batch,
                        dy,
                        batch,
                        m * n,
                        self.vals[b.0].data(),
                        &b_batch,
                        k * n,
                        slot,
                        &a_batch,
                        m * k,
                        m,
                        n,
                        k,
                    );
                }
                if self.requires[b.0] {
                    let slot = Self::accum_into(grads, *b, self.vals[b.0].numel());
                    // dB[k,n] += A[m,k]ᵀ · dY[m,n]
                    batched_mm(
                        Kern::TN,
                        batch,
                        self.vals[a.0].data(),
                        &a_batch,
                        m * k,
                        dy,
                        batch,
                        m * n,
                        slot,
                        &b_batch,
                        k * n,
                        k,
                        m,
                        n,
                    );
                }
            }
            Node::Transpose { a, perm } => {
                if self.requires[a.0] {
                    let mut inverse = vec![0usize; perm.len()];
                    for (d, &p) in perm.iter().enumerate() {
                        inverse[p] = d;
                    }
                    let in_shape = self.vals[a.0].shape();
                    let in_strides = strides_for(in_shape);
                    // Walk dy linearly (out coords), scatter into input offsets.
                    let mut contrib = vec![0usize; perm.len()];
                    for d in 0..perm.len() {
                        contrib[d] = in_strides[perm[d]];
                    }
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    let rank = out_shape.len();
                    let mut coords = vec![0usize; rank];
                    let mut in_off = 0usize;
                    for &g in dy {
                        slot[in_off] += g;
                        for d in (0..rank).rev() {
                            coords[d] += 1;
                            in_off += contrib[d];
                            if coords[d] < out_shape[d] {
                                break;
                            }
                            coords[d] = 0;
                            in_off -= contrib[d] * out_shape[d];
                        }
                    }
                }
            }
            Node::Reshape { a } => {
                if self.requires[a.0] {
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    for (s, &g) in slot.iter_mut().zip(dy) {
                        *s += g;
                    }
                }
            }
            Node::Concat { parts, axis } => {
                let (outer, axis_total, inner) = axis_split(&out_shape, *axis);
                let mut start = 0usize;
                for &p in parts {
                    let len_p = self.vals[p.0].shape()[*axis];
                    if self.requires[p.0] {
                        let slot = Self::accum_into(grads, p, self.vals[p.0].numel());
                        for o in 0..outer {
                            let src = o * axis_total * inner + start * inner;
                            let dst = o * len_p * inner;
                            for i in 0..len_p * inner {
                                slot[dst + i] += dy[src + i];
                            }
                        }
                    }
                    start += len_p;
                }
            }
            Node::Slice { a, axis, start } => {
                if self.requires[a.0] {
                    let in_shape = self.vals[a.0].shape().to_vec();
                    let (outer, axis_len, inner) = axis_split(&in_shape, *axis);
                    let len = out_shape[*axis];
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    for o in 0..outer {
                        let dst = o * axis_len * inner + start * inner;
                        let src = o * len * inner;
                        for i in 0..len * inner {
                            slot[dst + i] += dy[src + i];
                        }
                    }
                }
            }
            Node::SumAxis { a, axis } | Node::MeanAxis { a, axis } => {
                if self.requires[a.0] {
                    let in_shape = self.vals[a.0].shape().to_vec();
                    let (outer, axis_len, inner) = axis_split(&in_shape, *axis);
                    let scale = if matches!(self.nodes[id], Node::MeanAxis { .. }) {
                        1.0 / axis_len as f64
                    } else {
                        1.0
                    };
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    for o in 0..outer {
                        for j in 0..axis_len {
                            let base = o * axis_len * inner + j * inner;
                            for i in 0..inner {
                                slot[base + i] += dy[o * inner + i] * scale;
                            }
                        }
                    }
                }
            }
            Node::SumAll { a } | Node::MeanAll { a } => {
                if self.requires[a.0] {
                    let numel = self.vals[a.0].numel();
                    let scale = if matches!(self.nodes[id], Node::MeanAll { .. }) {
                        1.0 / numel as f64
                    } else {
                        1.0
                    };
                    let g = dy[0] * scale;
                    let slot = Self::accum_into(grads, *a, numel);
                    for s in slot.iter_mut() {
                        *s += g;
                    }
                }
            }
            Node::SoftmaxLast { a } => {
                if self.requires[a.0] {
                    let last = *out_shape.last().expect("rank >= 1");
                    let y = self.vals[id].data();
                    let slot = Self::accum_into(grads, *a, self.vals[a.0].numel());
                    for r in 0..y.len() / last {
                        let yr = &y[r * last..(r + 1) * last];
                        let dr = &dy[r * last..(r + 1) * last];
                        let dot: f64 = yr.iter().zip(dr).map(|(&yv, &gv)| yv * gv).sum();
                        for i in 0..last {
                            slot[r * last + i] += yr[i] * (dr[i] - dot);
                        }
                    }
                }
            }
            Node::LogSumExpLast { a } => {
                if self.requires[a.0] {
                    let x = self.vals[a.0].data();
                    let in_shape = self.vals[a.0].shape();
                    let last = *in_shape.last().expect("rank >= 1");
                    let y = self.vals[id].data();
                    let slot = Self::accum_into(grads, *a, x.len());
                    for r in 0..y.len() {
                        let g = dy[r];
                        let lse = y[r];
                        for i in 0..last {
                            slot[r * last + i] += g * (x[r * last + i] - lse).exp();
                        }
                    }
                }
            }
            Node::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let last = *out_shape.last().expect("rank >= 1");
                let rows = xhat.len() / last;
                let g = self.vals[gain.0].data();
                if self.requires[x.0] {
                    let slot = Self::accum_into(grads, *x, self.vals[x.0].numel());
                    for r in 0..rows {
                        let xh = &xhat[r * last..(r + 1) * last];
                        let dr = &dy[r * last..(r + 1) * last];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for i in 0..last {
                            let dxh = dr[i] * g[i];
                            m1 += dxh;
                            m2 += dxh * xh[i];
                        }
                        m1 /= last as f64;
                        m2 /= last as f64;
                        for i in 0..last {
                            let dxh = dr[i] * g[i];
                            slot[r * last + i] += inv_std[r] * (dxh - m1 - xh[i] * m2);
                        }
                    }
                }
                if self.requires[gain.0] {
                    let slot = Self::accum_into(grads, *gain, last);
                    for r in 0..rows {
                        for i in 0..last {
                            slot[i] += dy[r * last + i] * xhat[r * last + i];
                        }
                    }
                }
                if self.requires[bias.0] {
                    let slot = Self::accum_into(grads, *bias, last);
                    for r in 0..rows {
                        for i in 0..last {
                            slot[i] += dy[r * last + i];
                        }
                    }
                }
            }
            Node::Gelu { a } => {
                if self.requires[a.0] {
                    let x = self.vals[a.0].data();
                    let slot = Self::accum_into(grads, *a, x.len());
                    for (i, &g) in dy.iter().enumerate() {
                        slot[i] += g * gelu_derivative(x[i]);
                    }
                }
            }
            Node::Exp { a } => {
                if self.requires[a.0] {
                    let y = self.vals[id].data();
                    let slot = Self::accum_into(grads, *a, y.len());
                    for (i, &g) in dy.iter().enumerate() {
                        slot[i] += g * y[i];
                    }
                }
            }
            Node::Log { a } => {
                if self.requires[a.0] {
                    let x = self.vals[a.0].data();
                    let slot = Self::accum_into(grads, *a, x.len());
                    for (i, &g) in dy.iter().enumerate() {
                        slot[i] += g / x[i];
                    }
                }
            }
            Node::ClampMin { a, floor } => {
                if self.requires[a.0] {
                    let x = self.vals[a.0].data();
                    let slot = Self::accum_into(grads, *a, x.len());
                    for (i, &g) in dy.iter().enumerate() {
                        if x[i] > *floor {
                            slot[i] += g;
                        }
                    }
                }
            }
        }
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────────
