//! The two training stages.
//!
//! Stage 1 fits the encoders and retriever tokens with the quality and
//! utility contrastive losses and finishes by setting the fusion to pass
//! `g_i` through unchanged. Stage 2 freezes everything except the fusion
//! and fits it with BCE plus the `‖h_i − g_i‖²` regularizer.

use std::collections::{BTreeMap, BTreeSet};

use super::adam::Adam;
use super::checkpoint::{Checkpoint, EpochLog, Stage};
use super::config::{Stage1Mode, TrainConfig};
use super::losses::{loss_infonce, loss_stage2_with, Stage2Example, Stage2Options};
use crate::error::{Error, Result};
use crate::model::{EncoderParams, ParamBlocks, RouterModel, SparseVec};
use crate::numerics::{axpy, SplitMix64};
use crate::supervision::{build_query_supervision, QuerySupervision, SupervisionRecord};

/// Query texts and the supervision records collected for them.
#[derive(Debug, Clone, Default)]
pub struct TrainingData {
    pub queries: BTreeMap<String, String>,
    pub records: Vec<SupervisionRecord>,
}

/// A featurized query with both contrast sets.
#[derive(Debug, Clone)]
pub struct Stage1Example {
    pub features: SparseVec,
    pub supervision: QuerySupervision,
}

/// Stage-1 trainable parameters (also used as their gradient container).
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Params {
    pub enc_r: EncoderParams,
    pub enc_g: EncoderParams,
    pub tokens: Vec<Vec<f64>>,
}

impl Stage1Params {
    pub fn zeros_like(model: &RouterModel) -> Self {
        let (d, f) = (model.d, model.featurizer.d_feat);
        Self {
            enc_r: EncoderParams::zeros(d, f),
            enc_g: EncoderParams::zeros(d, f),
            tokens: vec![vec![0.0; f]; model.num_retrievers()],
        }
    }

    pub fn of(model: &RouterModel) -> Self {
        Self { enc_r: model.enc_r.clone(), enc_g: model.enc_g.clone(), tokens: model.tokens.clone() }
    }

    pub fn apply_to(&self, model: &mut RouterModel) {
        model.enc_r = self.enc_r.clone();
        model.enc_g = self.enc_g.clone();
        model.tokens = self.tokens.clone();
    }
}

impl ParamBlocks for Stage1Params {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = self.enc_r.blocks();
        out.extend(self.enc_g.blocks());
        out.extend(self.tokens.iter().map(Vec::as_slice));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.enc_r.blocks_mut();
        out.extend(self.enc_g.blocks_mut());
        out.extend(self.tokens.iter_mut().map(Vec::as_mut_slice));
        out
    }
}

fn stage1_blocks_mut(model: &mut RouterModel) -> Vec<&mut [f64]> {
    let mut out = model.enc_r.blocks_mut();
    out.extend(model.enc_g.blocks_mut());
    out.extend(model.tokens.iter_mut().map(Vec::as_mut_slice));
    out
}

/// Which encoder losses contribute to a stage-1 evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSelect {
    pub quality: bool,
    pub utility: bool,
}

impl LossSelect {
    pub const BOTH: Self = Self { quality: true, utility: true };
    pub const QUALITY: Self = Self { quality: true, utility: false };
    pub const UTILITY: Self = Self { quality: false, utility: true };
}

#[derive(Debug, Clone)]
pub struct Stage1Loss {
    /// Batch mean of `L_qual + L_util` (selected parts only).
    pub total: f64,
    pub quality: f64,
    pub utility: f64,
    pub grads: Stage1Params,
}

/// Batch-mean encoder losses and their gradients.
pub fn loss_stage1(model: &RouterModel, batch: &[Stage1Example], tau: f64, select: LossSelect) -> Result<Stage1Loss> {
    if batch.is_empty() {
        return Err(Error::Empty("stage-1 batch".into()));
    }
    let n = model.num_retrievers();
    let (ret_r, ret_g): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        (0..n).map(|i| model.encode_retriever(i)).collect::<Result<Vec<_>>>()?.into_iter().unzip();

    let scale = 1.0 / batch.len() as f64;
    let mut grads = Stage1Params::zeros_like(model);
    let mut d_ret_r = vec![vec![0.0; model.d]; n];
    let mut d_ret_g = vec![vec![0.0; model.d]; n];
    let (mut quality, mut utility) = (0.0, 0.0);

    for ex in batch {
        let q = model.encode_features(&ex.features);
        if select.quality {
            let out = loss_infonce(&q.r, &ret_r, &ex.supervision.quality, tau)
                .map_err(|e| tag(&ex.supervision.query_id, e))?;
            quality += out.loss;
            grads.enc_r.accumulate_sparse(&scaled(scale, &out.d_anchor), &ex.features);
            for (id, d) in &out.d_candidates {
                axpy(scale, d, &mut d_ret_r[*id]);
            }
        }
        if select.utility {
            let out = loss_infonce(&q.g, &ret_g, &ex.supervision.utility, tau)
                .map_err(|e| tag(&ex.supervision.query_id, e))?;
            utility += out.loss;
            grads.enc_g.accumulate_sparse(&scaled(scale, &out.d_anchor), &ex.features);
            for (id, d) in &out.d_candidates {
                axpy(scale, d, &mut d_ret_g[*id]);
            }
        }
    }
    // retriever embeddings are affine in their tokens: chain once per batch
    for i in 0..n {
        let token = &model.tokens[i];
        grads.enc_r.accumulate_dense(&d_ret_r[i], token);
        grads.enc_g.accumulate_dense(&d_ret_g[i], token);
        let mut d_tok = model.enc_r.w.matvec_t(&d_ret_r[i]);
        axpy(1.0, &model.enc_g.w.matvec_t(&d_ret_g[i]), &mut d_tok);
        grads.tokens[i] = d_tok;
    }
    quality *= scale;
    utility *= scale;
    Ok(Stage1Loss { total: quality + utility, quality, utility, grads })
}

fn scaled(a: f64, v: &[f64]) -> Vec<f64> {
    crate::numerics::scaled(a, v)
}

fn tag(query_id: &str, e: Error) -> Error {
    match e {
        Error::ContrastSet { .. } => e,
        other => Error::ContrastSet { query_id: query_id.to_string(), reason: other.to_string() },
    }
}

/// Featurizes every supervised query and builds both contrast sets.
pub fn prepare_examples(model: &RouterModel, data: &TrainingData, cfg: &TrainConfig) -> Result<Vec<Stage1Example>> {
    let sup = build_query_supervision(&data.records, model.num_retrievers(), cfg.k, cfg.utility())?;
    sup.into_iter()
        .map(|s| {
            let text = data.queries.get(&s.query_id).ok_or_else(|| Error::ContrastSet {
                query_id: s.query_id.clone(),
                reason: "no query text".into(),
            })?;
            let features = model.featurize(text).map_err(|e| tag(&s.query_id, e))?;
            Ok(Stage1Example { features, supervision: s })
        })
        .collect()
}

/// Deterministic train/validation split of `n` examples.
pub fn split_validation(n: usize, val_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Empty(format!("need at least 2 supervised queries, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::keyed(seed, &["val-split".into()]).shuffle(&mut idx);
    let n_val = ((n as f64 * val_ratio).round() as usize).clamp(1, n - 1);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

fn gather<T: Clone>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i].clone()).collect()
}

fn epoch_order(train: &[usize], seed: u64, stage: &str, epoch: usize) -> Vec<usize> {
    let mut order = train.to_vec();
    SplitMix64::keyed(seed, &[stage.into(), epoch.into()]).shuffle(&mut order);
    order
}

fn check_loss(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}

pub fn train_stage1(data: &TrainingData, cfg: &TrainConfig, init_model: &RouterModel) -> Result<Checkpoint> {
    cfg.validate()?;
    init_model.validate()?;
    let examples = prepare_examples(init_model, data, cfg)?;
    let (train_idx, val_idx) = split_validation(examples.len(), cfg.val_ratio, cfg.seed)?;
    let train_set = gather(&examples, &train_idx);
    let val_set = gather(&examples, &val_idx);

    let mut model = init_model.clone();
    let sizes: Vec<usize> = Stage1Params::of(&model).blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(cfg.lr, &sizes);
    // block layout: enc_r (0,1), enc_g (2,3), tokens (4..)
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let (select, active): (LossSelect, fn(usize) -> bool) = match cfg.stage1_mode {
            Stage1Mode::Joint => (LossSelect::BOTH, |_| true),
            Stage1Mode::Alternating if epoch % 2 == 0 => (LossSelect::QUALITY, |b| !(2..4).contains(&b)),
            Stage1Mode::Alternating => (LossSelect::UTILITY, |b| b >= 2),
        };
        let order = epoch_order(&train_idx, cfg.seed, "stage1-epoch", epoch);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Stage1Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let out = loss_stage1(&model, &batch, cfg.tau, select)?;
            check_loss(out.total, "stage-1 batch loss")?;
            if out.total < -1e-9 {
                return Err(Error::NonFinite(format!("negative contrastive loss {}", out.total)));
            }
            adam.step(stage1_blocks_mut(&mut model), out.grads.blocks(), active);
        }
        let train = loss_stage1(&model, &train_set, cfg.tau, LossSelect::BOTH)?;
        let val = loss_stage1(&model, &val_set, cfg.tau, LossSelect::BOTH)?;
        check_loss(train.total, "stage-1 training loss")?;
        history.push(train.total);
        log.push(EpochLog {
            epoch,
            stage: "stage1".into(),
            train_loss: train.total,
            val_loss: Some(val.total),
            components: [("qual".to_string(), train.quality), ("util".to_string(), train.utility)].into(),
        });
    }
    model.init_fusion_passthrough(cfg.seed)?;
    Ok(Checkpoint { model, config: cfg.clone(), stage: Stage::Stage1Done, train_loss_history: history, log })
}

/// Frozen-encoder inputs for stage 2.
pub fn stage2_examples(model: &RouterModel, examples: &[Stage1Example]) -> Vec<Stage2Example> {
    let n = model.num_retrievers();
    examples
        .iter()
        .map(|ex| {
            let q = model.encode_features(&ex.features);
            let labels = (0..n).map(|i| u8::from(ex.supervision.utility.is_positive(i))).collect();
            Stage2Example { r_q: q.r, g_q: q.g, labels }
        })
        .collect()
}

pub fn train_stage2(data: &TrainingData, cfg: &TrainConfig, stage1: &Checkpoint) -> Result<Checkpoint> {
    if stage1.stage != Stage::Stage1Done {
        return Err(Error::Stage(format!("train_stage2 needs a stage1_done checkpoint, got {:?}", stage1.stage)));
    }
    cfg.validate()?;
    let mut model = stage1.model.clone();
    let examples = prepare_examples(&model, data, cfg)?;
    let (train_idx, val_idx) = split_validation(examples.len(), cfg.val_ratio, cfg.seed)?;
    let all = stage2_examples(&model, &examples);
    let train_set = gather(&all, &train_idx);
    let val_set = gather(&all, &val_idx);
    let retrievers = (0..model.num_retrievers())
        .map(|i| model.encode_retriever(i))
        .collect::<Result<Vec<_>>>()?;
    let opts = Stage2Options { lambda_reg: cfg.lambda_reg, sim_scale: cfg.sim_scale };

    let sizes: Vec<usize> = model.fusion.blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(cfg.lr, &sizes);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut log = stage1.log.clone();
    for epoch in 0..cfg.epochs {
        let order = epoch_order(&train_idx, cfg.seed, "stage2-epoch", epoch);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Stage2Example> = chunk.iter().map(|&i| all[i].clone()).collect();
            let out = loss_stage2_with(&model.fusion, &retrievers, &batch, opts)?;
            check_loss(out.total, "stage-2 batch loss")?;
            adam.step(model.fusion.blocks_mut(), out.grads.blocks(), |_| true);
        }
        let train = loss_stage2_with(&model.fusion, &retrievers, &train_set, opts)?;
        let val = loss_stage2_with(&model.fusion, &retrievers, &val_set, opts)?;
        check_loss(train.total, "stage-2 training loss")?;
        history.push(train.total);
        log.push(EpochLog {
            epoch,
            stage: "stage2".into(),
            train_loss: train.total,
            val_loss: Some(val.total),
            components: [("cls".to_string(), train.cls), ("reg".to_string(), train.reg)].into(),
        });
    }
    Ok(Checkpoint { model, config: cfg.clone(), stage: Stage::Stage2Done, train_loss_history: history, log })
}

/// Ids of the validation queries under `cfg`'s split, in example order.
pub fn validation_query_ids(model: &RouterModel, data: &TrainingData, cfg: &TrainConfig) -> Result<BTreeSet<String>> {
    let examples = prepare_examples(model, data, cfg)?;
    let (_, val) = split_validation(examples.len(), cfg.val_ratio, cfg.seed)?;
    Ok(val.into_iter().map(|i| examples[i].supervision.query_id.clone()).collect())
}
