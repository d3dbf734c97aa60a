use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervision::UtilityConfig;

/// How the two encoder losses share optimizer steps in stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage1Mode {
    /// Both losses summed in every batch.
    #[default]
    Joint,
    /// Even epochs train the quality side, odd epochs the utility side.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub tau: f64,
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_reg: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub val_ratio: f64,
    pub stage1_mode: Stage1Mode,
    pub sim_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            k: 2,
            beta: 0.2,
            gamma: 0.2,
            lambda_reg: 0.1,
            lr: 1e-3,
            epochs: 10,
            batch_size: 32,
            seed: 7,
            val_ratio: 0.05,
            stage1_mode: Stage1Mode::Joint,
            sim_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn utility(&self) -> UtilityConfig {
        UtilityConfig { beta: self.beta, gamma: self.gamma }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        self.utility().validate()?;
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return bad(format!("lambda_reg must be >= 0, got {}", self.lambda_reg));
        }
        // lr = 0 is allowed: it freezes everything and is useful as a control
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be >= 0, got {}", self.lr));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return bad(format!("val_ratio must be in (0,1), got {}", self.val_ratio));
        }
        if !(self.sim_scale > 0.0 && self.sim_scale.is_finite()) {
            return bad(format!("sim_scale must be > 0, got {}", self.sim_scale));
        }
        Ok(())
    }
}
