//! Actor-critic PPO with a clipped surrogate objective.
//!
//! The actor emits a hybrid distribution (sigmoid-squashed Gaussians plus
//! categoricals) for either action space; the critic is a separate tower.
//! Parameters are `f32`, loss and advantage arithmetic is `f64`, and every
//! network is generic over the float so gradients can be checked in `f64`.

mod adam;
mod buffer;
mod checkpoint;
mod config;
mod dist;
mod net;
mod policy;
mod train;

pub use adam::Adam;
pub use buffer::{compute_gae, RolloutBatch};
pub use checkpoint::{Checkpoint, LayerBits, PolicyBits, CHECKPOINT_FORMAT};
pub use config::PpoConfig;
pub use dist::{sigmoid, HeadLayout, HybridAction, HybridDist, LOG_STD_MAX, LOG_STD_MIN};
pub use net::{orthogonal, Dense, Mlp, MlpCache, Scalar};
pub use policy::{LossConfig, LossStats, PolicyGrads, PolicyNet, PolicyOutput, INIT_STD};
pub use train::{
    env_seed, inference, train, BatchStats, InferenceMode, InferenceResult, IterationReport, PpoTrainer,
    TRAIN_COLUMNS,
};
