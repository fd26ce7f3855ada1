//! Differentiable primitives, implemented as methods on [`Graph`](crate::Graph).

mod activation;
mod conv;
mod elementwise;
mod linear;
mod lstm;
mod norm;
mod shape;

pub use conv::{conv_out_extent, Padding};
pub use lstm::{LstmParams, LstmState};
pub use norm::CLN_EPS;
