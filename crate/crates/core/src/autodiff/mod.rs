//! Reverse-mode automatic differentiation over dense `f64` arrays.

mod graph;
mod tensor;

pub use graph::{Graph, NodeId, OpTag, ReversalCoefficient};
pub use tensor::Tensor;
