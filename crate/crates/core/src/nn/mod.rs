//! A small reverse-mode differentiation engine over dense CPU tensors.
//!
//! Only what the networks in this crate need: 2-D convolutions, instance
//! normalization, separable resampling, pooling and a handful of pointwise ops.

pub mod conv;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod params;
pub mod spatial;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use ops::{concat_channels, sum_all};
pub use optim::{Adam, AdamConfig};
pub use params::{Bound, Conv2d, Initializer, ParamStore};
pub use spatial::AxisResampler;
pub use tensor::{Element, Tensor};
