//! Randomized finite-difference suite over every training loss.
//!
//! Each instance is a small random model with random contrast sets; the
//! quality loss, the utility loss and the stage-2 loss are checked on every
//! parameter coordinate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{FeaturizerConfig, FusionParams, ModelConfig, ParamBlocks, RouterModel};
use crate::numerics::{finite_diff_check, GradCheckOptions, GradCheckReport, SplitMix64};
use crate::supervision::{build_contrast_sets, ContrastSets, QuerySupervision};
use crate::training::{
    loss_stage1, loss_stage2, stage2_examples, LossSelect, Stage1Example, Stage1Params, Stage2Options,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradSuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub d: usize,
    pub heads: usize,
    pub d_feat: usize,
    /// Real retrievers; the null retriever is added on top.
    pub num_retrievers: usize,
    pub k: usize,
    pub queries: usize,
    pub tau: f64,
    pub lambda_reg: f64,
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 0,
            d: 8,
            heads: 2,
            d_feat: 64,
            num_retrievers: 3,
            k: 2,
            queries: 4,
            tau: 0.1,
            lambda_reg: 0.1,
            eps: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSuiteReport {
    pub config: GradSuiteConfig,
    pub checks: Vec<GradCheckReport>,
    pub max_rel_err: f64,
    pub passed: bool,
}

const WORDS: [&str; 12] =
    ["who", "wrote", "river", "capital", "album", "year", "team", "won", "first", "novel", "born", "city"];

fn random_sets(rng: &mut SplitMix64, eligible: BTreeSet<usize>, k: usize) -> Result<ContrastSets> {
    let scores: BTreeMap<usize, f64> = eligible.iter().map(|&i| (i, rng.uniform(0.0, 5.0))).collect();
    build_contrast_sets(&scores, &eligible, k)
}

fn instance(cfg: &GradSuiteConfig, seed: u64) -> Result<(RouterModel, Vec<Stage1Example>)> {
    let model_cfg = ModelConfig {
        featurizer: FeaturizerConfig { d_feat: cfg.d_feat, ..FeaturizerConfig::default() },
        d: cfg.d,
        heads: cfg.heads,
    };
    let mut model = RouterModel::random(&model_cfg, RouterModel::default_names(cfg.num_retrievers), seed)?;
    let mut rng = SplitMix64::keyed(seed, &["gradsuite".into()]);
    // a generic fusion, not the passthrough one, so every path is exercised
    model.fusion = FusionParams::random(cfg.d, cfg.heads, &mut rng)?;

    let n = cfg.num_retrievers + 1;
    let batch = (0..cfg.queries)
        .map(|j| {
            let len = 2 + rng.below(4);
            let text: Vec<&str> = (0..len).map(|_| WORDS[rng.below(WORDS.len())]).collect();
            let supervision = QuerySupervision {
                query_id: format!("q{j}"),
                quality: random_sets(&mut rng, (1..n).collect(), cfg.k)?,
                utility: random_sets(&mut rng, (0..n).collect(), cfg.k)?,
            };
            Ok(Stage1Example { features: model.featurize(&text.join(" "))?, supervision })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((model, batch))
}

fn check_stage1(
    name: String,
    model: &RouterModel,
    batch: &[Stage1Example],
    tau: f64,
    select: LossSelect,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let analytic = loss_stage1(model, batch, tau, select)?.grads.flatten();
    let base = Stage1Params::of(model);
    let mut probe_params = base.clone();
    let mut probe_model = model.clone();
    finite_diff_check(
        &name,
        |flat| {
            probe_params.assign(flat);
            probe_params.apply_to(&mut probe_model);
            Ok(loss_stage1(&probe_model, batch, tau, select)?.total)
        },
        &base.flatten(),
        &analytic,
        opts,
    )
}

fn check_stage2(
    name: String,
    model: &RouterModel,
    batch: &[Stage1Example],
    stage2: Stage2Options,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let examples = stage2_examples(model, batch);
    let analytic = loss_stage2(model, &examples, stage2)?.grads.flatten();
    let mut probe = model.clone();
    finite_diff_check(
        &name,
        |flat| {
            probe.fusion.assign(flat);
            Ok(loss_stage2(&probe, &examples, stage2)?.total)
        },
        &model.fusion.flatten(),
        &analytic,
        opts,
    )
}

/// Checks every coordinate of every loss on `cfg.instances` random instances.
pub fn run_gradient_suite(cfg: &GradSuiteConfig) -> Result<GradSuiteReport> {
    let opts = GradCheckOptions { eps: cfg.eps, probes: usize::MAX, seed: cfg.seed };
    let stage2 = Stage2Options { lambda_reg: cfg.lambda_reg, sim_scale: 1.0 };
    let mut checks = Vec::with_capacity(3 * cfg.instances);
    for s in 0..cfg.instances {
        let seed = SplitMix64::keyed(cfg.seed, &["instance".into(), s.into()]).next_u64();
        let (model, batch) = instance(cfg, seed)?;
        checks.push(check_stage1(format!("instance {s}: L_qual"), &model, &batch, cfg.tau, LossSelect::QUALITY, opts)?);
        checks.push(check_stage1(format!("instance {s}: L_util"), &model, &batch, cfg.tau, LossSelect::UTILITY, opts)?);
        checks.push(check_stage2(format!("instance {s}: L_cls + reg"), &model, &batch, stage2, opts)?);
    }
    let max_rel_err = checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    Ok(GradSuiteReport { config: *cfg, passed: max_rel_err < cfg.tolerance, max_rel_err, checks })
}
