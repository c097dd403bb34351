//! Small 1D CNN engine with hand-written backward passes.

mod adam;
mod checkpoint;
pub(crate) mod conv;
mod dense;
mod gemm;
mod layer;
mod loss;
mod model;
mod norm;
mod pool;
mod tensor;
mod train;

pub use adam::{adam_update, Adam, AdamConfig};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use conv::Conv1d;
pub use dense::Dense;
pub use layer::{Flatten, Layer, Param, Relu, Residual};
pub use loss::{softmax, softmax_cross_entropy};
pub use model::{assemble_model, build_backbone, standardize, Backbone, Model, ModelMode, TfConvConfig};
pub use norm::BatchNorm1d;
pub use pool::{AdaptiveAvgPool1d, MaxPool1d};
pub use tensor::Tensor;
pub use train::{evaluate, predict, train, EpochRecord, Evaluation, TrainConfig, TrainHistory};
