//! Feed-forward softmax classifier: forward pass, exact backpropagation,
//! factored last-layer gradients, deterministic training and checkpoints.

mod checkpoint;
mod config;
mod gradient;
mod mlp;
mod train;

pub use checkpoint::{
    load_checkpoint, load_model_dir, save_checkpoint, save_model_dir, CheckpointDocument, SavedModel, CHECKPOINT_DIR,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION, MODEL_FILE,
};
pub use config::{MlpConfig, Optimizer};
pub use gradient::{last_layer_gradient, logit_gradient, FactoredGradient};
pub use mlp::{ForwardPass, Layer, ModelParams, ParamGradients};
pub use train::{accuracy, risk, train, Checkpoint, TrainedModel};
