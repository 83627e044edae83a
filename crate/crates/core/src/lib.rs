//! Self-supervised sparse ISAR imaging.

pub mod autodiff;
pub mod denoiser;
pub mod equivariance;
pub mod error;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod solvers;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{ComplexTensor, Tensor};

pub type RealTensor = Tensor<f64>;
pub type ComplexImage = ComplexTensor<f64>;
pub type EchoMatrix = ComplexTensor<f64>;
pub type RealTensorF32 = Tensor<f32>;
pub type ComplexImageF32 = ComplexTensor<f32>;
