//! Minimal convolutional autoencoder engine: layer specs, He initialization,
//! batched forward passes, hand-derived backpropagation, Adam, and checkpoints.

mod adam;
mod arch;
pub mod checkpoint;
mod layers;
mod network;
mod params;

pub use adam::{optimizer_step, AdamConfig, AdamState};
pub use arch::{ArchitectureSpec, LayerSpec, Shape};
pub use network::{backward, decode, encode, l2_penalty, reconstruct, LossBreakdown, LossSpec};
pub use params::{init_params, AutoencoderParams, GradientSet, ParamTensor, TensorRole};
