use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{ModelFile, RouterModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1Done,
    Stage2Done,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLog {
    pub epoch: usize,
    pub stage: String,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub components: BTreeMap<String, f64>,
}

/// Training metadata stored next to the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub stage: Stage,
    pub train_loss_history: Vec<f64>,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: RouterModel,
    pub config: TrainConfig,
    pub stage: Stage,
    /// Per-epoch training loss of the stage that produced this checkpoint.
    pub train_loss_history: Vec<f64>,
    /// Log lines of every stage run so far.
    pub log: Vec<EpochLog>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let meta = TrainingMeta {
            config: self.config.clone(),
            stage: self.stage,
            train_loss_history: self.train_loss_history.clone(),
            log: self.log.clone(),
        };
        ModelFile::from_model(&self.model, Some(meta)).to_json()
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let (model, meta) = ModelFile::from_json(raw)?.into_model()?;
        let meta = meta.ok_or_else(|| Error::schema("checkpoint has no training metadata"))?;
        meta.config.validate().map_err(|e| Error::schema(e.to_string()))?;
        if meta.stage == Stage::Stage2Done && !meta.log.iter().any(|l| l.stage == "stage1") {
            return Err(Error::schema("stage2_done checkpoint without a stage-1 log"));
        }
        Ok(Self {
            model,
            config: meta.config,
            stage: meta.stage,
            train_loss_history: meta.train_loss_history,
            log: meta.log,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let json = ckpt.to_json()?;
    // re-validate what we are about to write
    Checkpoint::from_json(&json)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_json(&std::fs::read_to_string(path)?)
}
