//! Dense and sparse numeric primitives.
//!
//! All kernels are pure: inputs are never mutated and identical input bits
//! give identical output bits. Parallel paths split output rows only, so
//! every accumulation keeps a fixed order.

mod activation;
mod matrix;
mod sparse;

pub use activation::{
    apply_nonlinearity, leaky_relu, relu, row_l2_normalize, sigmoid, softmax_in_place, softplus,
    Nonlinearity,
};
pub use matrix::DenseMatrix;
pub use sparse::{spmm, sym_normalize, NormalizedAdjacency};
