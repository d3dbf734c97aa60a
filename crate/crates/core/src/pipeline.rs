//! End-to-end run in memory: world, supervision, both training stages and
//! the baseline comparison on the test split.

use crate::error::Result;
use crate::eval::{evaluate_policy, r0_analysis, ComparisonTable, ConstantPolicy, Policy, R0Analysis, RouterPolicy};
use crate::model::{ModelConfig, RouterModel};
use crate::simenv::{generate_world, oracle_policies, SimConfig, SimWorld, Split};
use crate::training::{train_stage1, train_stage2, Checkpoint, TrainConfig, TrainingData};

pub const ROUTER: &str = "router";

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub world: SimWorld,
    pub data: TrainingData,
    pub stage1: Checkpoint,
    pub stage2: Checkpoint,
    pub comparison: ComparisonTable,
    pub r0: R0Analysis,
}

pub fn training_data(world: &SimWorld) -> Result<TrainingData> {
    Ok(TrainingData {
        queries: world.train.iter().map(|q| (q.id.clone(), q.text.clone())).collect(),
        records: world.collect_supervision(Split::Train)?,
    })
}

/// Router, no-retrieval, random, single-best and per-query-oracle reports on
/// the test split, with deltas against single-best.
pub fn compare(world: &SimWorld, model: &RouterModel, random_seed: u64) -> Result<(ComparisonTable, R0Analysis)> {
    let baselines = oracle_policies(world, Split::Test, random_seed)?;
    let router = RouterPolicy::new(ROUTER, model.compile()?);
    let no_retrieval = ConstantPolicy::no_retrieval();
    let policies: [&dyn Policy; 5] =
        [&router, &no_retrieval, &baselines.random, &baselines.single_best, &baselines.per_query_oracle];
    let rows = policies
        .iter()
        .map(|p| evaluate_policy(*p, world, Split::Test))
        .collect::<Result<Vec<_>>>()?;
    let r0 = r0_analysis(&rows[0], &rows[1])?;
    Ok((ComparisonTable::new(rows, "single_best")?, r0))
}

pub fn run_pipeline(sim: &SimConfig, train: &TrainConfig, model: &ModelConfig) -> Result<PipelineRun> {
    let world = generate_world(sim)?;
    let data = training_data(&world)?;
    let init = RouterModel::random(model, RouterModel::default_names(sim.num_retrievers), train.seed)?;
    let stage1 = train_stage1(&data, train, &init)?;
    let stage2 = train_stage2(&data, train, &stage1)?;
    let (comparison, r0) = compare(&world, &stage2.model, train.seed)?;
    Ok(PipelineRun { world, data, stage1, stage2, comparison, r0 })
}
