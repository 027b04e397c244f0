//! End-to-end training and encoding: normalized features pass through the
//! autoencoder stack, are thresholded to bits, and the RBM head maps them to
//! the final `code_bits`-bit code.

mod config;
mod model;
mod persist;
mod train;

pub use config::{Tolerance, TrainingConfig};
pub use model::{identity_stats, Model, FORMAT_VERSION};
pub use persist::{from_bytes, load_model, payload, save_model, to_bytes, MODEL_MAGIC};
pub use train::{train, History, IterationRecord, DIVERGENCE_LIMIT};
