//! A small batch-normalized MLP trained from scratch.

pub mod adam;
pub mod fused;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod matrix;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamState, TrainConfig};
pub use fused::{FusedMlp, FusedScratch};
pub use io::{load_params, save_params, SavedModel, TrainedOn, MODEL_FORMAT_VERSION};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::Matrix;
pub use mlp::{init_params, Gradients, MlpParams};
pub use train::{train, Classifier, History, Prediction, TrainingSet};
