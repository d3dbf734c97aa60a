//! Contrastive and fusion losses with hand-derived gradients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{FusionParams, RouterModel};
use crate::numerics::{cosine_with_grad, log_sum_exp, norm, sigmoid, softplus, sub};
use crate::supervision::ContrastSets;

#[derive(Debug, Clone)]
pub struct InfoNceOutput {
    pub loss: f64,
    pub d_anchor: Vec<f64>,
    /// Gradient per candidate id (every positive and negative).
    pub d_candidates: BTreeMap<usize, Vec<f64>>,
}

/// `Σ_{p∈P} [ −sim(a, e_p)/τ + log Σ_{c∈P∪N} exp(sim(a, e_c)/τ) ]`
///
/// `candidates` is indexed by retriever id.
pub fn loss_infonce(
    anchor: &[f64],
    candidates: &[Vec<f64>],
    sets: &ContrastSets,
    tau: f64,
) -> Result<InfoNceOutput> {
    if sets.positives.is_empty() {
        return Err(Error::Empty("contrast set has no positives".into()));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::config(format!("temperature must be > 0, got {tau}")));
    }
    let ids: Vec<usize> = sets.candidates().collect();
    let mut grads = Vec::with_capacity(ids.len());
    let mut logits = Vec::with_capacity(ids.len());
    for &id in &ids {
        let e = candidates
            .get(id)
            .ok_or(Error::OutOfRange { what: "candidate id", id, max: candidates.len().saturating_sub(1) })?;
        let cg = cosine_with_grad(anchor, e)?;
        logits.push(cg.value / tau);
        grads.push(cg);
    }
    let lse = log_sum_exp(&logits)?;
    let n_pos = sets.positives.len() as f64;
    let mut loss = n_pos * lse;
    let mut d_anchor = vec![0.0; anchor.len()];
    let mut d_candidates = BTreeMap::new();
    for (j, (&id, cg)) in ids.iter().zip(&grads).enumerate() {
        let positive = j < sets.positives.len();
        if positive {
            loss -= logits[j];
        }
        let softmax = (logits[j] - lse).exp();
        let d_logit = n_pos * softmax - if positive { 1.0 } else { 0.0 };
        let d_sim = d_logit / tau;
        for (a, g) in d_anchor.iter_mut().zip(&cg.d_a) {
            *a += d_sim * g;
        }
        d_candidates.insert(id, cg.d_b.iter().map(|g| d_sim * g).collect());
    }
    Ok(InfoNceOutput { loss, d_anchor, d_candidates })
}

/// `sigmoid(sim(h, g_q))`.
pub fn matching_probability(h: &[f64], g_q: &[f64]) -> Result<f64> {
    Ok(sigmoid(crate::numerics::cosine_sim(h, g_q)?))
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
pub fn bce_with_logit(z: f64, y: u8) -> f64 {
    if y == 1 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// One stage-2 training item: frozen query embeddings and one label per
/// retriever id (`1` iff the retriever is in the query's utility top-k).
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Example {
    pub r_q: Vec<f64>,
    pub g_q: Vec<f64>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Stage2Loss {
    /// `cls + λ_reg · reg`
    pub total: f64,
    /// Mean BCE over (query, retriever) pairs.
    pub cls: f64,
    /// Mean `‖h_i − g_i‖²` over pairs.
    pub reg: f64,
    /// Gradient of `total` with respect to the fusion parameters.
    pub grads: FusionParams,
}

/// Options of the fusion objective.
#[derive(Debug, Clone, Copy)]
pub struct Stage2Options {
    pub lambda_reg: f64,
    /// Multiplier on the cosine before the sigmoid; `1` is the plain form.
    pub sim_scale: f64,
}

/// Fusion loss over a batch, with gradients for the fusion parameters only.
pub fn loss_stage2(model: &RouterModel, batch: &[Stage2Example], opts: Stage2Options) -> Result<Stage2Loss> {
    let retrievers = (0..model.num_retrievers())
        .map(|i| model.encode_retriever(i))
        .collect::<Result<Vec<_>>>()?;
    loss_stage2_with(&model.fusion, &retrievers, batch, opts)
}

pub(crate) fn loss_stage2_with(
    fusion: &FusionParams,
    retrievers: &[(Vec<f64>, Vec<f64>)],
    batch: &[Stage2Example],
    opts: Stage2Options,
) -> Result<Stage2Loss> {
    if batch.is_empty() {
        return Err(Error::Empty("stage-2 batch".into()));
    }
    let n_pairs = (batch.len() * retrievers.len()) as f64;
    let mut grads = FusionParams::zeros(fusion.dim(), fusion.heads())?;
    let mut cls = 0.0;
    let mut reg = 0.0;
    for ex in batch {
        if ex.labels.len() != retrievers.len() {
            return Err(Error::LengthMismatch { expected: retrievers.len(), actual: ex.labels.len() });
        }
        for ((r_i, g_i), &y) in retrievers.iter().zip(&ex.labels) {
            if y > 1 {
                return Err(Error::schema(format!("stage-2 label {y} not in {{0,1}}")));
            }
            let trace = fusion.forward(&ex.r_q, r_i, g_i)?;
            let h = &trace.out;
            let cg = cosine_with_grad(h, &ex.g_q)?;
            let z = opts.sim_scale * cg.value;
            cls += bce_with_logit(z, y);
            let diff = sub(h, g_i);
            reg += norm(&diff).powi(2);

            let d_z = (sigmoid(z) - f64::from(y)) * opts.sim_scale / n_pairs;
            let reg_coef = 2.0 * opts.lambda_reg / n_pairs;
            let d_h: Vec<f64> =
                cg.d_a.iter().zip(&diff).map(|(dc, df)| d_z * dc + reg_coef * df).collect();
            fusion.backward(&trace, &ex.r_q, r_i, g_i, &d_h, &mut grads);
        }
    }
    cls /= n_pairs;
    reg /= n_pairs;
    Ok(Stage2Loss { total: cls + opts.lambda_reg * reg, cls, reg, grads })
}
