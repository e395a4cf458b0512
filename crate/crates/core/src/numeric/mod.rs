//! Minimal dense numeric core: tensors, forward kernels, tape-based
//! reverse-mode differentiation, finite-difference verification, and Adam.

pub mod adam;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::finite_diff_check;
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
