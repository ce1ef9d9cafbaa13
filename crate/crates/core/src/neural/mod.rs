//! Minimal float64 neural substrate: dense stacks, token-embedding LSTM
//! encoders, initializers, Adam and flat-binary checkpoints.
//!
//! Every network stores its parameters as one flat `Vec<f64>` described by
//! a [`Layout`] of named row-major tensors. Gradients use the same layout,
//! so the optimizer and the checkpoint format never need to know the
//! architecture.

mod adam;
mod checkpoint;
mod init;
mod layout;
mod lstm;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use init::{glorot_uniform, orthogonal_init};
pub use layout::{Layout, TensorSpec};
pub use lstm::{Activation, SeqNet, SeqNetConfig, SeqTape};
pub use mlp::{Mlp, MlpSpec, MlpTape};
