//! Morphological generalizations of ReLU and max-pooling.
//!
//! - [`morphops`]: dilation, erosion, ReLU, strided max/min pooling and the
//!   positive/negative pooling variants.
//! - [`activations`]: max-min piecewise-linear activations and the two
//!   fused activation-pooling layers with learnable structuring functions.
//! - [`representation`]: brute-force kernel and basis extraction for
//!   increasing operators on small lattices, and max-min PL algebra.
//! - [`autodiff`]: the tape used to train all of the above.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the experiments.

pub mod activations;
pub mod autodiff;
pub mod error;
pub mod gradsuite;
pub mod morphops;
pub mod representation;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::{PlaneLayout, Tensor};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type StructuringFunction64 = morphops::StructuringFunction<f64>;
