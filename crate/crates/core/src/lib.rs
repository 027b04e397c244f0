//! Deep hashing of real-valued feature vectors into compact binary codes.
//!
//! A stack of tanh autoencoders, each trained with penalties that push its
//! outputs toward balanced and uncorrelated bits, feeds a thresholded
//! representation into a binary RBM whose hidden layer yields the final
//! `k`-bit code. The [`search`] module evaluates codes with exact Hamming
//! scans and precision-recall sweeps over the search radius.
//!
//! Models are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the common instantiations.

// Validation uses `!(x >= 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod code;
pub mod constraints;
pub mod error;
pub mod features;
pub mod init;
pub mod pipeline;
pub mod rbm;
pub mod sae;
pub mod scalar;
pub mod search;

pub use code::HashCode;
pub use constraints::{Constraints, DecorrelationMode};
pub use error::{Error, Result};
pub use init::InitMode;
pub use pipeline::{train, IterationRecord, Model, Tolerance, TrainingConfig};
pub use scalar::Scalar;

pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type SaeLayer64 = sae::SaeLayer<f64>;
pub type SaeLayer32 = sae::SaeLayer<f32>;
pub type SaeStack64 = sae::SaeStack<f64>;
pub type SaeStack32 = sae::SaeStack<f32>;
pub type Rbm64 = rbm::Rbm<f64>;
pub type Rbm32 = rbm::Rbm<f32>;
pub type Model64 = pipeline::Model<f64>;
pub type Model32 = pipeline::Model<f32>;
pub type TrainingConfig64 = pipeline::TrainingConfig<f64>;
pub type TrainingConfig32 = pipeline::TrainingConfig<f32>;
