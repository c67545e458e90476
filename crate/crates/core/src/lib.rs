//! Neural networks with radial-quadratic decision functions.
//!
//! A radial-quadratic neuron evaluates `σ(w·x + ξ‖x‖² + θ)`; for `ξ > 0` and a
//! non-positive center offset its level sets are circles. This crate provides
//! such layers next to ordinary affine layers, hand-written backpropagation,
//! Adam training for binary classification, a k-means baseline, synthetic
//! 2D datasets and the experiment harness used by the `rqnn` CLI.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod modelfile;
pub mod network;
pub mod numkernel;
pub mod training;

pub use error::{Error, Result};
pub use numkernel::{Rng, Scalar};

pub type VectorF64 = numkernel::Vector<f64>;
pub type VectorF32 = numkernel::Vector<f32>;
pub type MatrixF64 = numkernel::Matrix<f64>;
pub type MatrixF32 = numkernel::Matrix<f32>;
pub type LayerParamsF64 = network::LayerParams<f64>;
pub type LayerParamsF32 = network::LayerParams<f32>;
pub type ModelF64 = network::Model<f64>;
pub type ModelF32 = network::Model<f32>;
pub type DatasetF64 = dataio::Dataset<f64>;
pub type DatasetF32 = dataio::Dataset<f32>;
pub type AdamStateF64 = training::AdamState<f64>;
pub type KMeansResultF64 = baselines::KMeansResult<f64>;
