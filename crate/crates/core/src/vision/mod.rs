//! A pLSTM vision block, a minimal two-block classifier with exact
//! gradients, and a full-batch trainer for the arrow task.

mod checkpoint;
mod config;
mod layer;
mod model;
mod norm;
mod patch;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry};
pub use config::{BlockMode, Channel, LayerConfig, Mode, ModelConfig, Pooling};
pub use layer::{layer_backward, layer_forward, LayerCache, LayerParams};
pub use model::{accuracy, batch_loss, bce, model_backward, Model, ModelParams, Sample};
pub use norm::{rms_backward, rms_forward, RmsOut};
pub use patch::{corner_indices, patchify, pool_corners, Image};
pub use train::{downsample, samples_from, train, train_toy, write_loss_csv, TrainConfig, TrainReport};
