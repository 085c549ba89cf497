//! Numeric substrate: dense `f64` tensors, a reverse-mode differentiation
//! tape, Adam, and finite-difference gradient checking.

mod gradcheck;
pub mod init;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_params_fn, check_tensor_fn, finite_diff_check};
pub use optim::{clip_grad_norm, AdamState};
pub use params::{ParamId, Params};
pub use tape::{Bound, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("expected a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = NumError> = std::result::Result<T, E>;
