//! Dense arrays, small fully connected networks with hand-written
//! backpropagation, and gradient-descent optimizers.

mod array;
pub mod checkpoint;
mod mlp;
mod optim;
mod params;

pub use array::{log_softmax, softmax, RealArray};
pub use mlp::{
    accumulate_backward, mlp_backward, mlp_forward, mlp_init, zero_output_layer, Activation, ForwardCache, GradWrt,
    MlpConfig, OutputActivation,
};
pub(crate) use mlp::forward_unchecked;
pub use optim::{sgd_step, Adam, Optimizer, OptimizerKind};
pub use params::ParamSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("non-finite value in `{0}`")]
    NonFiniteEntry(String),
    #[error("rejected update: non-finite gradient in `{0}`")]
    RejectedUpdate(String),
    #[error("empty input")]
    Empty,
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter sets have different layouts")]
    LayoutMismatch,
    #[error("activation cache does not match the network")]
    CacheMismatch,
    #[error("checkpoint format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}
