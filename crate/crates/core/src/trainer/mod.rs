//! Training schedule, checkpointing, and logging.

pub mod checkpoint;
pub mod config;
pub mod log;
pub mod stages;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, StageTag};
pub use config::{ProfileKind, TrainConfig};
pub use log::{LogRecord, TrainingLog};
pub use stages::{
    build_variant, convert_with, stage_gan, stage_joint_se_vc, stage_pretrain_se,
    train_clean_autovc, Variant, ALL_VARIANTS,
};
