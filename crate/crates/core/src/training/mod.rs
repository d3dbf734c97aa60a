//! Two-stage optimization of the router and checkpoint persistence.

mod adam;
mod checkpoint;
mod config;
mod losses;
mod trainer;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, EpochLog, Stage, TrainingMeta};
pub use config::{Stage1Mode, TrainConfig};
pub use losses::{
    bce_with_logit, loss_infonce, loss_stage2, matching_probability, InfoNceOutput, Stage2Example,
    Stage2Loss, Stage2Options,
};
pub use trainer::{
    loss_stage1, prepare_examples, split_validation, stage2_examples, train_stage1, train_stage2,
    validation_query_ids, LossSelect, Stage1Example, Stage1Loss, Stage1Params, TrainingData,
};
