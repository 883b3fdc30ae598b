//! Quantum-inspired complex-valued convolutional neural networks.
//!
//! Data and weights live on the complex unit circle via phase encoding;
//! complex convolutions are realized as four real convolutions; five network
//! variants swap quantum-inspired layers into a LeNet-style template. The
//! crate bundles the tensor/autodiff engine, the unit-circle operations, the
//! network builders, dataset ingestion, and a training/evaluation harness.
//!
//! Everything numeric is generic over the [`scalar::Scalar`] element type;
//! the `f64` aliases below are what the CLI and the self-check suites use.

pub mod autodiff;
pub mod error;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Default real tensor: `f64` elements.
pub type RealTensor = Tensor<f64>;

/// Default autodiff tape over `f64`.
pub type RealTape = autodiff::Tape<f64>;
