use std::sync::OnceLock;

use caprouter::eval::{evaluate_queries, RouterPolicy};
use caprouter::model::{ModelConfig, RouterModel};
use caprouter::pipeline::{run_pipeline, training_data, PipelineRun};
use caprouter::simenv::{generate_world, SimConfig, SimQuery, Split};
use caprouter::training::{
    load_checkpoint, save_checkpoint, train_stage1, train_stage2, validation_query_ids, Stage, TrainConfig,
};
use caprouter::Error;

fn smoke() -> &'static PipelineRun {
    static RUN: OnceLock<PipelineRun> = OnceLock::new();
    RUN.get_or_init(|| run_pipeline(&SimConfig::default(), &TrainConfig::default(), &ModelConfig::default()).unwrap())
}

fn tiny() -> (SimConfig, TrainConfig, ModelConfig) {
    let sim = SimConfig { n_train: 120, n_test: 40, ..SimConfig::default() };
    let train = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let model = ModelConfig { d: 8, heads: 2, ..ModelConfig::default() };
    (sim, train, model)
}

#[test]
fn stage1_loss_is_roughly_non_increasing_on_the_smoke_world() {
    let history = &smoke().stage1.train_loss_history;
    assert_eq!(history.len(), TrainConfig::default().epochs);
    let upticks: Vec<f64> = history.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] / w[0] - 1.0).collect();
    assert!(upticks.len() <= 2, "{history:?}");
    assert!(upticks.iter().all(|&u| u < 0.05), "{history:?}");
    assert!(history.last() < history.first());
}

#[test]
fn stage2_does_not_hurt_validation_em_on_the_smoke_world() {
    let run = smoke();
    let val_ids = validation_query_ids(&run.stage1.model, &run.data, &TrainConfig::default()).unwrap();
    let val: Vec<SimQuery> = run.world.split(Split::Train).iter().filter(|q| val_ids.contains(&q.id)).cloned().collect();
    assert_eq!(val.len(), val_ids.len());
    let em = |model: &RouterModel| {
        evaluate_queries(&RouterPolicy::new("router", model.compile().unwrap()), &run.world, &val).unwrap().em_mean
    };
    let (after1, after2) = (em(&run.stage1.model), em(&run.stage2.model));
    assert!(after2 >= after1, "stage 1 {after1}, stage 2 {after2}");
}

#[test]
fn stage2_leaves_encoders_and_tokens_untouched() {
    let (sim, train, model) = tiny();
    let world = generate_world(&sim).unwrap();
    let data = training_data(&world).unwrap();
    let init = RouterModel::random(&model, RouterModel::default_names(sim.num_retrievers), train.seed).unwrap();
    let s1 = train_stage1(&data, &train, &init).unwrap();
    let s2 = train_stage2(&data, &train, &s1).unwrap();
    assert_eq!(s2.stage, Stage::Stage2Done);
    assert_eq!(s1.model.enc_r, s2.model.enc_r);
    assert_eq!(s1.model.enc_g, s2.model.enc_g);
    assert_eq!(s1.model.tokens, s2.model.tokens);
    assert_ne!(s1.model.fusion, s2.model.fusion);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let (sim, mut train, model) = tiny();
    train.lr = 0.0;
    let world = generate_world(&sim).unwrap();
    let data = training_data(&world).unwrap();
    let init = RouterModel::random(&model, RouterModel::default_names(sim.num_retrievers), train.seed).unwrap();

    let s1 = train_stage1(&data, &train, &init).unwrap();
    assert_eq!(s1.model.enc_r, init.enc_r);
    assert_eq!(s1.model.enc_g, init.enc_g);
    assert_eq!(s1.model.tokens, init.tokens);
    assert!(s1.train_loss_history.windows(2).all(|w| w[0] == w[1]), "{:?}", s1.train_loss_history);

    let s2 = train_stage2(&data, &train, &s1).unwrap();
    assert_eq!(s2.model, s1.model);
    assert!(s2.train_loss_history.windows(2).all(|w| w[0] == w[1]), "{:?}", s2.train_loss_history);
}

#[test]
fn stage2_requires_a_stage1_checkpoint() {
    let (sim, train, model) = tiny();
    let world = generate_world(&sim).unwrap();
    let data = training_data(&world).unwrap();
    let init = RouterModel::random(&model, RouterModel::default_names(sim.num_retrievers), train.seed).unwrap();
    let s2 = train_stage2(&data, &train, &train_stage1(&data, &train, &init).unwrap()).unwrap();
    assert!(matches!(train_stage2(&data, &train, &s2), Err(Error::Stage(_))));
}

#[test]
fn reloaded_checkpoint_routes_identically() {
    let (sim, train, model) = tiny();
    let run = run_pipeline(&SimConfig { n_test: 100, ..sim }, &train, &model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    save_checkpoint(&run.stage2, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, run.stage2);
    let (a, b) = (run.stage2.model.compile().unwrap(), back.model.compile().unwrap());
    let test = run.world.split(Split::Test);
    assert_eq!(test.len(), 100);
    for q in test {
        let (x, y) = (a.route(&q.text).unwrap(), b.route(&q.text).unwrap());
        assert_eq!(x.chosen, y.chosen);
        let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.scores), bits(&y.scores));
    }
}

#[test]
fn training_is_deterministic() {
    let (sim, train, model) = tiny();
    let a = run_pipeline(&sim, &train, &model).unwrap();
    let b = run_pipeline(&sim, &train, &model).unwrap();
    assert_eq!(a.stage1.to_json().unwrap(), b.stage1.to_json().unwrap());
    assert_eq!(a.stage2.to_json().unwrap(), b.stage2.to_json().unwrap());
    let c = run_pipeline(&sim, &TrainConfig { seed: train.seed + 1, ..train }, &model).unwrap();
    assert_ne!(a.stage2.to_json().unwrap(), c.stage2.to_json().unwrap());
}
