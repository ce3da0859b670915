//! Logistic regression and the 32-16-1 MLP, trained from scratch.

mod activation;
mod linear;
mod mlp;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use activation::{bce_loss, relu, relu_derivative, sigmoid, BCE_EPS};
pub use linear::{lr_forward, lr_gradient, LinearModel};
pub use mlp::{mlp_backprop, mlp_forward, MlpCache, MlpModel};
pub use optim::{adam_step, sgd_step, AdamHyper, AdamState};
pub use params::{init_params, mlp_weight_limits, Layout, ParamVector};
pub use train::{predict, train, Optimizer, TrainConfig, TrainOutcome};

pub const HIDDEN1: usize = 32;
pub const HIDDEN2: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Lr,
    Mlp,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelFamily::Lr => "lr",
            ModelFamily::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter layout mismatch: expected {expected}, got {found}")]
    LayoutMismatch { expected: String, found: String },
    #[error("layout {layout} needs {expected} parameters, got {found}")]
    LengthMismatch {
        layout: String,
        expected: usize,
        found: usize,
    },
    #[error("unrecognised layout tag '{0}'")]
    BadLayoutTag(String),
    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Diverged { epoch: usize, learning_rate: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
