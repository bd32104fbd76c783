//! Dense ReLU network with a linear softmax decision layer, trained by
//! hand-written backpropagation.

mod finetune;
mod metrics;
mod mlp;
mod train;

pub use finetune::finetune_head;
pub use metrics::{evaluate, Metrics};
pub use mlp::{gradient_check, Dense, Forward, Mlp, MlpGrads};
pub use train::{fit_from, train_mlp, EpochRecord, Labeled, TrainConfig, TrainReport};
