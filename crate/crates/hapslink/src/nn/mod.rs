//! Minimal CNN regression engine: rank-3 real tensors, zero-padded 2-D
//! convolution, ReLU, a squared-error regression head, exact
//! backpropagation, SGD and Adam optimizers, and a mini-batch training loop
//! with a validation split.
//!
//! Everything runs on the CPU in f64. Training is deterministic for a given
//! seed: per-sample gradients are reduced in sample order no matter how the
//! batch is scheduled across threads.

mod conv;
mod model;
mod optim;
pub(crate) mod serialize;
mod tensor;
mod train;

pub use conv::{conv2d_forward, ConvGrads, ConvLayer};
pub use model::{mse_loss, relu, CnnLayer, CnnModel, ModelGrads};
pub use optim::{adam_step, sgd_step, AdamState};
pub use serialize::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION};
pub use tensor::Tensor3;
pub use train::{train, validation_split_counts, EpochStats, TrainConfig};
