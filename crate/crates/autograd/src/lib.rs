//! Minimal deterministic tensor engine with reverse-mode differentiation.
//!
//! Only the primitives the FUN-SSL network needs are provided: affine maps,
//! PReLU, cumulative layer normalization, depth-wise (transposed) 2D
//! convolution and fused LSTM layers, plus the Adam optimizer and a
//! finite-difference gradient checker. All reductions run in a fixed
//! sequential order, so identical inputs give bit-identical results.

mod adam;
mod error;
pub mod gradcheck;
mod graph;
pub mod ops;
mod scalar;
mod tensor;

pub use adam::{adam_update, AdamState};
pub use error::{AutogradError, Result};
pub use gradcheck::{grad_check, grad_check_inputs, relative_error, GRAD_CHECK_EPS};
pub use graph::{BackwardCtx, BackwardFn, Gradients, Graph, Var};
pub use ops::{conv_out_extent, LstmParams, LstmState, Padding, CLN_EPS};
pub use scalar::Scalar;
pub use tensor::Tensor;
