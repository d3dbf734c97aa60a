use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use caprouter::eval::{evaluate_queries, ConstantPolicy, RandomPolicy};
use caprouter::model::{FeaturizerConfig, FusionParams, ModelConfig, RouterModel};
use caprouter::numerics::{cosine_sim, log_sum_exp, softmax, SplitMix64};
use caprouter::simenv::{generate_world, SimConfig, Split};
use caprouter::supervision::{
    build_contrast_sets, exact_match, f1_score, normalize_answer, parse_judge_json, utility_score, ContrastSets,
    GenerationOutcome, QualityAssessment, UtilityConfig,
};
use caprouter::training::{loss_infonce, loss_stage2, Stage2Example, Stage2Options};

fn small_model(seed: u64) -> RouterModel {
    let cfg = ModelConfig { featurizer: FeaturizerConfig { d_feat: 64, ..FeaturizerConfig::default() }, d: 8, heads: 2 };
    RouterModel::random(&cfg, RouterModel::default_names(3), seed).unwrap()
}

fn vec_of(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.normal()).collect()
}

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

fn query_text() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,5}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(xs in prop::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
        let p = softmax(&xs).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_commutes_with_shifts(xs in prop::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let scale = xs.iter().chain(&shifted).fold(1.0f64, |m, x| m.max(x.abs()));
        let lhs = log_sum_exp(&shifted).unwrap();
        let rhs = log_sum_exp(&xs).unwrap() + c;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * xs.len() as f64, "{lhs} vs {rhs}");
    }

    #[test]
    fn cosine_ignores_positive_scaling(
        ab in (1usize..16).prop_flat_map(|n| (finite_vec(n), finite_vec(n))),
        lambda in 1e-3f64..1e3,
        mu in 1e-3f64..1e3,
    ) {
        let (a, b) = ab;
        prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
        let base = cosine_sim(&a, &b).unwrap();
        let la: Vec<f64> = a.iter().map(|x| lambda * x).collect();
        let mb: Vec<f64> = b.iter().map(|x| mu * x).collect();
        prop_assert!((cosine_sim(&la, &mb).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn contrast_sets_partition_the_eligible_ids(
        scores in prop::collection::vec(-5.0f64..5.0, 2..10),
        k_frac in 0.0f64..1.0,
    ) {
        let eligible: BTreeSet<usize> = (0..scores.len()).collect();
        let k = 1 + ((scores.len() - 1) as f64 * k_frac) as usize % (scores.len() - 1);
        let map: BTreeMap<usize, f64> = scores.iter().copied().enumerate().collect();
        let sets = build_contrast_sets(&map, &eligible, k).unwrap();
        prop_assert_eq!(sets.positives.len(), k);
        let union: BTreeSet<usize> = sets.candidates().collect();
        prop_assert_eq!(union.len(), scores.len());
        prop_assert_eq!(union, eligible);
        // every positive scores at least as high as every negative
        let min_pos = sets.positives.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
        let max_neg = sets.negatives.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min_pos >= max_neg);
    }

    #[test]
    fn raising_a_score_never_demotes(
        scores in prop::collection::vec(-5.0f64..5.0, 3..10),
        who in any::<prop::sample::Index>(),
        bump in 0.0f64..10.0,
    ) {
        let eligible: BTreeSet<usize> = (0..scores.len()).collect();
        let mut map: BTreeMap<usize, f64> = scores.iter().copied().enumerate().collect();
        let before = build_contrast_sets(&map, &eligible, 2).unwrap();
        let id = who.index(scores.len());
        *map.get_mut(&id).unwrap() += bump;
        let after = build_contrast_sets(&map, &eligible, 2).unwrap();
        if before.is_positive(id) {
            prop_assert!(after.is_positive(id));
        }
    }

    #[test]
    fn em_and_f1_are_bounded(pred in "[a-zA-Z ,.]{0,20}", gold in "[a-zA-Z ,.]{1,20}") {
        let em = exact_match(&pred, &[&gold]).unwrap();
        let f1 = f1_score(&pred, &[&gold]).unwrap();
        prop_assert!(em <= 1);
        prop_assert!((0.0..=1.0).contains(&f1));
        if normalize_answer(&pred) == normalize_answer(&gold) {
            prop_assert_eq!(em, 1);
            prop_assert_eq!(f1, 1.0);
        }
        prop_assert_eq!(exact_match(&gold, &[&gold]).unwrap(), 1);
    }

    #[test]
    fn utility_is_affine_in_f1_and_sigma(
        em in 0u8..=1,
        f1 in 0.0f64..=1.0,
        sigma in 0.0f64..=1.0,
        beta in 0.0f64..2.0,
        gamma in 0.0f64..2.0,
    ) {
        let o = GenerationOutcome { answer: "x".into(), em, f1 };
        let u = utility_score(&o, sigma, UtilityConfig { beta, gamma });
        let u2 = utility_score(&o, sigma, UtilityConfig { beta: 2.0 * beta, gamma });
        prop_assert!(((u2 - u) - beta * f1).abs() <= 1e-12);
        let expected = f64::from(em) + beta * f1 + gamma * sigma;
        prop_assert!((u - expected).abs() <= 1e-12);
    }

    #[test]
    fn judge_replies_round_trip(dims in prop::array::uniform5(1u8..=5)) {
        let a = QualityAssessment::from_dimensions(dims).unwrap();
        let parsed = parse_judge_json(&a.to_judge_json()).unwrap();
        prop_assert_eq!(parsed.assessment.dimensions(), dims);
        prop_assert_eq!(parsed.assessment.overall.to_bits(), a.overall.to_bits());
        prop_assert!(!parsed.overall_replaced);
    }

    #[test]
    fn single_positive_infonce_is_nonnegative(
        seed in any::<u64>(),
        n in 2usize..6,
        tau in 0.01f64..2.0,
    ) {
        let mut rng = SplitMix64::new(seed);
        let anchor = vec_of(&mut rng, 6);
        let cands: Vec<Vec<f64>> = (0..n).map(|_| vec_of(&mut rng, 6)).collect();
        let pos = rng.below(n);
        let sets = ContrastSets { positives: vec![pos], negatives: (0..n).filter(|&i| i != pos).collect(), k: 1 };
        prop_assert!(loss_infonce(&anchor, &cands, &sets, tau).unwrap().loss >= 0.0);
    }

    #[test]
    fn scaling_the_query_utility_embedding_keeps_the_route(
        seed in any::<u64>(),
        text in query_text(),
        lambda in prop::sample::select(vec![0.1, 5.0, 100.0, 1e-3, 1e3]),
    ) {
        let model = small_model(seed);
        let q = model.encode_query(&text).unwrap();
        let base = model.route_embedded(&q.r, &q.g).unwrap();
        let g: Vec<f64> = q.g.iter().map(|x| lambda * x).collect();
        let scaled = model.route_embedded(&q.r, &g).unwrap();
        prop_assert_eq!(base.chosen, scaled.chosen);
        for (a, b) in base.scores.iter().zip(&scaled.scores) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn routing_is_deterministic_and_compiled_agrees(seed in any::<u64>(), text in query_text()) {
        let model = small_model(seed);
        let a = model.route(&text).unwrap();
        let b = model.clone().route(&text).unwrap();
        let c = model.compile().unwrap().route(&text).unwrap();
        let bits = |d: &caprouter::model::RoutingDecision| d.scores.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(a.chosen, b.chosen);
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(bits(&a), bits(&c));
    }

    #[test]
    fn equal_slots_make_fusion_ignore_the_query(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let fusion = FusionParams::random(8, 2, &mut rng).unwrap();
        let v = vec_of(&mut rng, 8);
        let h = fusion.forward(&vec_of(&mut rng, 8), &v, &v).unwrap().out;
        let mut perturbed = fusion.clone();
        for w in &mut perturbed.w_q {
            for x in w.as_mut_slice() {
                *x += rng.normal();
            }
        }
        let h2 = perturbed.forward(&vec_of(&mut rng, 8), &v, &v).unwrap().out;
        for (a, b) in h.iter().zip(&h2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn permuting_the_catalog_permutes_the_scores(
        seed in any::<u64>(),
        text in query_text(),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let model = small_model(seed);
        let mut permuted = model.clone();
        permuted.tokens = perm.iter().map(|&i| model.tokens[i].clone()).collect();
        permuted.retriever_names = perm.iter().map(|&i| model.retriever_names[i].clone()).collect();
        let base = model.route(&text).unwrap();
        let moved = permuted.route(&text).unwrap();
        for (slot, &orig) in perm.iter().enumerate() {
            prop_assert_eq!(moved.scores[slot].to_bits(), base.scores[orig].to_bits());
        }
    }

    #[test]
    fn stage2_components_recombine(seed in any::<u64>(), lambda_reg in 0.0f64..10.0, sim_scale in 0.5f64..5.0) {
        let model = small_model(seed);
        let mut rng = SplitMix64::new(seed ^ 0x5eed);
        let batch: Vec<Stage2Example> = (0..3)
            .map(|_| Stage2Example {
                r_q: vec_of(&mut rng, 8),
                g_q: vec_of(&mut rng, 8),
                labels: (0..4).map(|_| u8::from(rng.next_u64().is_multiple_of(2))).collect(),
            })
            .collect();
        let l = loss_stage2(&model, &batch, Stage2Options { lambda_reg, sim_scale }).unwrap();
        prop_assert!((l.total - (l.cls + lambda_reg * l.reg)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evaluation_ignores_query_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let cfg = SimConfig { seed, n_train: 10, n_test: 60, ..SimConfig::default() };
        let world = generate_world(&cfg).unwrap();
        let queries = world.split(Split::Test).to_vec();
        let mut shuffled = queries.clone();
        let mut rng = SplitMix64::new(shuffle_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let random = RandomPolicy { seed, num_choices: 4 };
        let constant = ConstantPolicy::new("r2", 2);
        for policy in [&random as &dyn caprouter::eval::Policy, &constant] {
            let a = evaluate_queries(policy, &world, &queries).unwrap();
            let b = evaluate_queries(policy, &world, &shuffled).unwrap();
            prop_assert_eq!(&a.split, &b.split);
            prop_assert_eq!(a.em_mean, b.em_mean);
            prop_assert!((a.f1_mean - b.f1_mean).abs() <= 1e-12);
            prop_assert_eq!(&a.selection_histogram, &b.selection_histogram);
            prop_assert_eq!(a.r0_rate, b.r0_rate);
        }
    }
}
