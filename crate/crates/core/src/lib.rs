//! Tensor network formats and algorithms: dense multilinear algebra, CP and
//! Tucker models, tensor trains (MPS/MPO), quantized tensor trains, and
//! randomized sketching.

pub mod block;
pub mod cp;
pub mod error;
pub mod linalg;
pub mod lrmf;
pub mod ops;
pub mod qtt;
pub mod rng;
pub mod sketch;
pub mod tensor;
pub mod tt;
pub mod tucker;

pub use error::{Result, TensorError};
pub use tensor::{DenseTensor, Matrix, Shape};
