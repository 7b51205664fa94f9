//! Dense tensors, a reverse-mode tape, parameter storage, AdamW and the
//! checkpoint container. Every model layer is built from these pieces.

mod adamw;
pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use adamw::{clip_grad_norm, AdamWConfig, AdamWState};
pub use params::{kaiming_uniform, normal_init, ParamId, ParamStore};
pub use tape::{gelu, Tape, Var, MASK_VALUE};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("invalid shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },
    #[error("ragged rows")]
    Ragged,
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: index out of range for shape {shape:?}")]
    OutOfRange { op: &'static str, shape: Vec<usize> },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("softmax row has no unmasked entry")]
    AllMaskedRow,
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("{0}")]
    InvalidArgument(&'static str),
}
