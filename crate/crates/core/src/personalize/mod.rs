//! Population pretraining, anchor initialization and joint tuning of the
//! generator with the anchors.

mod config;
mod model;
mod pretrain;
mod tune;

pub use config::{AnchorOptimizer, PretrainConfig, TrainConfig};
pub use model::{generate_with, PersonalizedModel, Provenance};
pub use pretrain::{
    check_population, factor_embedding, population_mse, pretrain, reconstruct, PretrainReport, Pretrained,
    MIN_IDENTITIES, MIN_PER_IDENTITY,
};
pub use tune::{init_anchors, tune, EpochStats, History, Tuning};
