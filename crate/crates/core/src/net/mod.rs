//! One-dimensional convolutional regressor with a hand-written reverse pass.

pub mod adam;
pub mod arch;
pub mod checkpoint;
pub mod linalg;
pub mod model;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use arch::{init_network, Activation, NetParams, NetShape, Tensor};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use linalg::Real;
pub use model::{backward, backward_batch, conv1d, forward, forward_batch, predict, BatchForward};
