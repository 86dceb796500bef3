//! Deterministic numeric kernels for sequence tensors.
//!
//! Every differentiable kernel here has an explicit forward and backward
//! function; there is no tape. Reductions accumulate in `f64`.

mod activation;
mod conv;
mod gemm;
mod gradcheck;
mod matrix;
mod rng;

pub use activation::{
    dropout, dropout_backward, log_softmax_backward, log_softmax_rows, relu, relu_backward, softmax_backward,
    softmax_rows, DropoutMask,
};
pub(crate) use conv::{axpy, conv1d_backward_impl, conv_with_weight};
pub use conv::{conv1d_backward, conv1d_forward, ConvParams};
pub use gradcheck::grad_check;
pub use matrix::SeqMatrix;
pub use rng::RngState;
