use caprouter::eval::{evaluate_policy, ConstantPolicy};
use caprouter::simenv::{generate_world, oracle_policies, SimConfig, Split};

/// Ranks with ties given their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_rank_helper_matches_hand_values() {
    assert_eq!(ranks(&[3.0, 1.0, 2.0, 1.0]), [3.0, 0.5, 2.0, 0.5]);
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]) - 0.993_399_267_798_783).abs() < 1e-12);
}

#[test]
fn judge_scores_track_latent_quality() {
    for seed in [7, 8, 9] {
        let world = generate_world(&SimConfig { seed, n_train: 400, n_test: 10, ..SimConfig::default() }).unwrap();
        let (mut judged, mut latent) = (Vec::new(), Vec::new());
        for q in world.split(Split::Train) {
            for i in 1..=world.config.num_retrievers {
                judged.push(world.mock_judge(q, i).unwrap().overall);
                latent.push(world.latent_quality(q, i).unwrap());
            }
        }
        let rho = pearson(&ranks(&judged), &ranks(&latent));
        assert!(rho > 0.9, "seed {seed}: spearman {rho}");
    }
}

#[test]
fn judge_overall_grows_with_quality() {
    let cfg = SimConfig {
        num_query_types: 2,
        skill: vec![vec![0.3, 0.7, 0.5]; 2],
        noise_sd: 0.0,
        n_train: 1000,
        n_test: 1,
        ..SimConfig::default()
    };
    let world = generate_world(&cfg).unwrap();
    let mean = |i: usize| {
        let qs = world.split(Split::Train);
        qs.iter().map(|q| world.mock_judge(q, i).unwrap().overall).sum::<f64>() / qs.len() as f64
    };
    let (low, high) = (mean(1), mean(2));
    // 1 + 4Q: 2.2 and 3.8 before rounding and jitter
    assert!((low - 2.2).abs() < 0.2 && (high - 3.8).abs() < 0.2, "{low} {high}");
    assert!(high > low);
}

#[test]
fn baseline_ordering_holds_across_worlds() {
    let worlds = [
        SimConfig::default(),
        SimConfig { seed: 11, ..SimConfig::default() },
        SimConfig { seed: 12, popular_tail: None, n_test: 200, ..SimConfig::default() },
        SimConfig {
            seed: 13,
            num_retrievers: 4,
            num_query_types: 2,
            skill: vec![vec![0.8, 0.4, 0.1, 0.6], vec![0.2, 0.7, 0.9, 0.3]],
            n_test: 300,
            ..SimConfig::default()
        },
    ];
    for cfg in worlds {
        let world = generate_world(&SimConfig { n_train: 10, ..cfg }).unwrap();
        let p = oracle_policies(&world, Split::Test, world.config.seed).unwrap();
        let em = |policy: &dyn caprouter::eval::Policy| evaluate_policy(policy, &world, Split::Test).unwrap().em_mean;
        let (oracle, single, random) = (em(&p.per_query_oracle), em(&p.single_best), em(&p.random));
        assert!(oracle >= single && single > random, "seed {}: {oracle} {single} {random}", world.config.seed);
        for id in 0..=world.config.num_retrievers {
            assert!(single >= em(&ConstantPolicy::new("c", id)));
        }
    }
}

#[test]
fn null_retriever_outcomes_ignore_skill() {
    let a = generate_world(&SimConfig { n_train: 200, n_test: 10, ..SimConfig::default() }).unwrap();
    let b = generate_world(&SimConfig {
        n_train: 200,
        n_test: 10,
        skill: vec![vec![0.0, 1.0, 0.4]; 3],
        noise_sd: 0.3,
        correctness_slope: 3.0,
        correctness_threshold: 0.9,
        ..SimConfig::default()
    })
    .unwrap();
    for (qa, qb) in a.split(Split::Train).iter().zip(b.split(Split::Train)) {
        assert_eq!(qa, qb);
        assert_eq!(a.mock_generate(qa, 0).unwrap(), b.mock_generate(qb, 0).unwrap());
    }
}

#[test]
fn constant_null_policy_matches_generated_outcomes() {
    let world = generate_world(&SimConfig { n_train: 10, n_test: 300, ..SimConfig::default() }).unwrap();
    let report = evaluate_policy(&ConstantPolicy::no_retrieval(), &world, Split::Test).unwrap();
    let test = world.split(Split::Test);
    let ems: u32 = test.iter().map(|q| u32::from(world.mock_generate(q, 0).unwrap().em)).sum();
    assert_eq!(report.em_mean, f64::from(ems) / test.len() as f64);
    assert_eq!(report.r0_rate, 1.0);
    assert_eq!(report.em_at_r0, Some(report.em_mean));
    assert_eq!(report.selection_histogram[&0], test.len());
}
