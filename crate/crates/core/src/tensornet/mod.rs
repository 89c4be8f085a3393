//! Dense network primitives: parameter tensors, affine layers, the embedding tower,
//! the Adam optimizer and the parameter container.

mod adam;
pub mod container;
mod matrix;
mod param;
mod scalar;
mod tower;

pub use adam::{AdamConfig, AdamState};
pub use container::Container;
pub use matrix::Matrix;
pub use param::{relu_in_place, relu_mask, Linear, ParamTensor};
pub use scalar::{dot, squared_distance, Scalar};
pub use tower::{Activation, Tower, TowerCache, TowerSpec, EMBEDDING_INIT_BOUND, NORM_EPSILON};
