//! Regret approximator: feature encoding, network, training and model files.

pub mod features;
pub mod mlp;
pub mod train;

/// Largest game length the feature layout has room for.
pub const MAX_GAME_STEPS: usize = 4;

pub use features::{decode, encode, FeatureVector, FEATURE_LEN};
pub use mlp::{grad_check, GradCheck, Grads, Mlp, Scalar};
pub use train::{train, write_train_log, Dataset, EpochLog, TrainOptions, TrainResult};
