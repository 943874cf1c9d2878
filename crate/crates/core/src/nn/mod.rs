//! Small neural-network substrate: row-major tensors, a fixed layer-sequence
//! network with exact reverse-mode gradients, losses and optimizers.
//!
//! Everything here is generic over the [`Scalar`] element type.

mod conv1d;
mod dense;
mod embedding;
mod error;
pub mod gradcheck;
mod layer;
pub mod loss;
mod lstm;
mod network;
mod optim;
mod scalar;
mod tensor;

pub use error::NnError;
pub use gradcheck::{grad_check, grad_check_logits, GradCheckReport};
pub use layer::{softmax, Activation, Layer, LayerSpec};
pub use loss::{cross_entropy_loss, huber_loss, mse_loss, CrossEntropy};
pub use network::{Gradients, Network, MODEL_FORMAT_VERSION};
pub use optim::{Optimizer, OptimizerKind};
pub use scalar::{sigmoid, Scalar};
pub use tensor::Tensor;
