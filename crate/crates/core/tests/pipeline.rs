use caprouter::model::ModelConfig;
use caprouter::pipeline::{run_pipeline, ROUTER};
use caprouter::simenv::SimConfig;
use caprouter::training::TrainConfig;

/// Each type has two retrievers that always answer and one that never does;
/// the null retriever never answers. The top-2 utility sets are then exactly
/// the answering retrievers, so a working router matches the oracle.
#[test]
fn separable_world_is_routed_perfectly() {
    let sim = SimConfig {
        skill: vec![vec![0.9, 0.9, 0.1], vec![0.1, 0.9, 0.9], vec![0.9, 0.1, 0.9]],
        popularity_range: (0.0, 0.0),
        popular_tail: None,
        noise_sd: 0.0,
        correctness_slope: 1e6,
        n_train: 600,
        n_test: 200,
        ..SimConfig::default()
    };
    let model = ModelConfig { d: 16, heads: 2, ..ModelConfig::default() };
    let run = run_pipeline(&sim, &TrainConfig { epochs: 5, ..TrainConfig::default() }, &model).unwrap();
    let router = run.comparison.row(ROUTER).unwrap();
    assert_eq!(router.em_mean, 1.0, "{}", run.comparison.render());
}
