//! A small 3D convolutional network engine with exactly the layer vocabulary
//! needed by the NormalNet regressor: `conv3d`, batch normalization, ReLU,
//! residual blocks, global max pooling, fully connected layers and `tanh`.
//!
//! Activations are stored channel-last (`N × D × H × W × C`). Convolutions are
//! lowered to GEMM through im2col, one sample at a time, so the per-sample work
//! can be spread over a rayon pool when the `parallel` feature is enabled.
//! Every reduction runs in a fixed order, which keeps results identical between
//! the parallel and sequential builds.
//!
//! The engine is generic over [`Scalar`] so the same code runs in `f32` for
//! training and inference and in `f64` for finite-difference gradient checks.

mod error;
mod layers;
mod network;
mod optim;
mod par;
mod scalar;
mod spec;
mod tensor;
mod weights;

pub use error::{Error, Result};
pub use network::{backward, forward, mse_loss, Mode, Network};
pub use optim::{adam_step, lr_schedule, AdamHyper, AdamState};
pub use scalar::Scalar;
pub use spec::{
    build_normalnet_spec, build_normalnet_spec_for, same_padding, LayerSpec, NetworkSpec, Shape,
    Shortcut, DEFAULT_MU_G_LIST,
};
pub use tensor::Tensor;
pub use weights::{load_weights, save_weights, Blob, BlobKind, NetworkWeights, Weights};
