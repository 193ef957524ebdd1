//! Dense row-major `f64` tensors and the shape algebra shared by every op.
//!
//! A [`Tensor`] owns its data; gradients live in an optional side buffer of
//! the same length.  Broadcasting follows the usual right-aligned rule: two
//! dimensions are compatible when they are equal or one of them is 1.

use std::fmt;

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes of tensor construction and tape operations.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Two operand shapes cannot be combined by the named op.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An argument is structurally invalid (bad axis, bad permutation, ...).
    InvalidArgument { op: &'static str, message: String },
    /// An input value lies outside the op's numeric domain.
    NumericDomain { op: &'static str, message: String },
    /// A usage-contract violation (non-scalar loss, repeated backward, ...).
    Contract { message: String },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            TensorError::InvalidArgument { op, message } => write!(f, "{op}: {message}"),
            TensorError::NumericDomain { op, message } => write!(f, "{op}: {message}"),
            TensorError::Contract { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for TensorError {}

// ─── Tensor ──────────────────────────────────────────────────────────────────

/// A dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    /// Whether backward passes should produce a gradient for this tensor.
    pub requires_grad: bool,
    /// Gradient buffer filled in by [`crate::tape::Tape::backward`]; same
    /// length as `data`.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    /// Builds a tensor from a shape and matching data buffer.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, TensorError> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::InvalidArgument {
                op: "tensor",
                message: format!("zero-sized dimension in shape {shape:?}"),
            });
        }
        if numel != data.len() {
            return Err(TensorError::InvalidArgument {
                op: "tensor",
                message: format!(
                    "shape {shape:?} implies {numel} elements but {} were given",
                    data.len()
                ),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let numel = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel]).expect("zeros: internal shape error")
    }

    /// Constant-filled tensor of the given shape.
    pub fn full(shape: Vec<usize>, value: f64) -> Tensor {
        let numel = shape.iter().product();
        Tensor::new(shape, vec![value; numel]).expect("full: internal shape error")
    }

    /// Single-element tensor of shape `[1]`.
    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(vec![1], vec![value]).expect("scalar: internal shape error")
    }

    /// Marks the tensor as a gradient target and returns it.
    pub fn with_grad(mut self) -> Tensor {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for optimizers; shape is fixed after construction.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single element addressed by its flat row-major index.
    pub fn at(&self, flat: usize) -> f64 {
        self.data[flat]
    }
}

// ─── Shape helpers ───────────────────────────────────────────────────────────

/// Row-major strides for a shape (innermost dimension has stride 1).
pub(crate) fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    let mut acc = 1usize;
    for d in (0..shape.len()).rev() {
        strides[d] = acc;
        acc *= shape[d];
    }
    strides
}

/// Right-aligned broadcast of two shapes, or a shape-mismatch error.
pub(crate) fn broadcast_shapes(
    op: &'static str,
    lhs: &[usize],
    rhs: &[usize],
) -> Result<Vec<usize>, TensorError> {
    let rank = lhs.len().max(rhs.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let a = if i < rank - lhs.len() {
            1
        } else {
            lhs[i - (rank - lhs.len())]
        };
        let b = if i < rank - rhs.len() {
            1
        } else {
            rhs[i - (rank - rhs.len())]
        };
        out[i] = if a == b {
            a
        } else if a == 1 {
            b
        } else if b == 1 {
            a
        } else {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: lhs.to_vec(),
                rhs: rhs.to_vec(),
            });
        };
    }
    Ok(out)
}

/// Strides of `shape` viewed as `out_rank` broadcast dimensions: padded
/// leading dims and size-1 dims get stride 0 so they repeat in place.
pub(crate) fn broadcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let own = strides_for(shape);
    let pad = out_shape.len() - shape.len();
    let mut out = vec![0usize; out_shape.len()];
    for d in 0..shape.len() {
        out[pad + d] = if shape[d] == 1 { 0 } else { own[d] };
    }
    out
}

/// Applies `f` elementwise over two broadcast-compatible buffers.
pub(crate) fn broadcast_binary(
    a: &[f64],
    a_shape: &[usize],
    b: &[f64],
    b_shape: &[usize],
    out_shape: &[usize],
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let numel: usize = out_shape.iter().product();
    if a_shape == b_shape {
        return a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
    }
    let astr = broadcast_strides(a_shape, out_shape);
    let bstr = broadcast_strides(b_shape, out_shape);
    let rank = out_shape.len();
    let mut coords = vec![0usize; rank];
    let (mut ao, mut bo) = (0usize, 0usize);
    let mut out = Vec::with_capacity(numel);
    for _ in 0..numel {
        out.push(f(a[ao], b[bo]));
        for d in (0..rank).rev() {
            coords[d] += 1;
            ao += astr[d];
            bo += bstr[d];
            if coords[d] < out_shape[d] {
                break;
            }
            coords[d] = 0;
            ao -= astr[d] * out_shape[d];
            bo -= bstr[d] * out_shape[d];
        }
    }
    out
}

/// Sums a gradient at `from_shape` down to `to_shape`, undoing broadcast.
pub(crate) fn reduce_to_shape(grad: &[f64], from_shape: &[usize], to_shape: &[usize]) -> Vec<f64> {
    if from_shape == to_shape {
        return grad.to_vec();
    }
    let to_numel: usize = to_shape.iter().product();
    let tstr = broadcast_strides(to_shape, from_shape);
    let rank = from_shape.len();
    let mut coords = vec![0usize; rank];
    let mut to_off = 0usize;
    let mut out = vec![0.0; to_numel];
    for &g in grad {
        out[to_off] += g;
        for d in (0..rank).rev() {
            coords[d] += 1;
            to_off += tstr[d];
            if coords[d] < from_shape[d] {
                break;
            }
            coords[d] = 0;
            to_off -= tstr[d] * from_shape[d];
        }
    }
    out
}
