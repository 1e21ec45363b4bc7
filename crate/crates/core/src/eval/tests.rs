use std::collections::{BTreeSet, HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{IntentGraph, NodeId, NodeKind, Provenance, RelationKind};
use crate::model::{Activation, ModelVariant, TrainConfig};
use crate::score::ScoreConfig;

use super::*;

/// 20 users, 25 items, exactly 100 interaction edges, plus one intent the
/// users possess and every item satisfies.
fn hundred_interactions() -> IntentGraph {
    let mut graph = IntentGraph::new();
    let users: Vec<NodeId> = (0..20).map(|k| graph.add_user(format!("user {k}"))).collect();
    let items: Vec<NodeId> = (0..25).map(|k| graph.add_item(format!("item {k}"))).collect();
    let intent = graph.intent("evening wind-down").expect("valid label");
    for (k, &user) in users.iter().enumerate() {
        for j in 0..5 {
            graph
                .add_edge(
                    user,
                    items[(3 * k + j) % 25],
                    RelationKind::UserConsumesItem,
                    Provenance::NotApplicable,
                )
                .expect("distinct interactions");
        }
        graph
            .add_edge(user, intent, RelationKind::UserPossessesIntent, Provenance::Exact)
            .expect("fresh edge");
    }
    for &item in &items {
        graph
            .add_edge(item, intent, RelationKind::ItemSatisfiesIntent, Provenance::Related)
            .expect("fresh edge");
    }
    graph
}

fn consume_pairs(graph: &IntentGraph) -> BTreeSet<(u64, u64)> {
    graph
        .edges()
        .iter()
        .filter(|e| e.relation == RelationKind::UserConsumesItem)
        .map(|e| (e.head.0, e.tail.0))
        .collect()
}

fn count_relation(graph: &IntentGraph, relation: RelationKind) -> usize {
    graph.edges().iter().filter(|e| e.relation == relation).count()
}

fn spec(seed: u64, eval_negatives: usize) -> SplitSpec {
    SplitSpec {
        ratios: (0.8, 0.1, 0.1),
        seed,
        eval_negatives,
    }
}

mod split {
    use super::*;

    #[test]
    fn hundred_interactions_split_eighty_ten_ten() {
        let graph = hundred_interactions();
        let data = split_edges(&graph, &spec(5, 10)).expect("plenty of edges");
        assert_eq!(data.dev.len(), 10);
        assert_eq!(data.test.len(), 10);
        assert_eq!(count_relation(&data.train_graph, RelationKind::UserConsumesItem), 80);
        data.train_graph.check_consistency().expect("surgery left a clean graph");
    }

    #[test]
    fn same_seed_reproduces_the_split_and_another_seed_moves_it() {
        let graph = hundred_interactions();
        let first = split_edges(&graph, &spec(11, 7)).unwrap();
        let second = split_edges(&graph, &spec(11, 7)).unwrap();
        assert_eq!(first.dev, second.dev);
        assert_eq!(first.test, second.test);
        assert_eq!(consume_pairs(&first.train_graph), consume_pairs(&second.train_graph));

        let moved = split_edges(&graph, &spec(12, 7)).unwrap();
        let held = |d: &DataSplit| -> Vec<(u64, u64)> {
            d.dev
                .iter()
                .chain(&d.test)
                .map(|q| (q.user.0, q.positive.0))
                .collect()
        };
        assert_ne!(held(&first), held(&moved));
    }

    #[test]
    fn held_out_pairs_and_train_edges_partition_the_interactions() {
        let graph = hundred_interactions();
        let all = consume_pairs(&graph);
        for seed in 0..5 {
            let data = split_edges(&graph, &spec(seed, 5)).unwrap();
            let train = consume_pairs(&data.train_graph);
            let dev: BTreeSet<(u64, u64)> =
                data.dev.iter().map(|q| (q.user.0, q.positive.0)).collect();
            let test: BTreeSet<(u64, u64)> =
                data.test.iter().map(|q| (q.user.0, q.positive.0)).collect();

            assert!(dev.is_disjoint(&test));
            assert!(dev.is_disjoint(&train));
            assert!(test.is_disjoint(&train));
            let mut rebuilt = train.clone();
            rebuilt.extend(&dev);
            rebuilt.extend(&test);
            assert_eq!(rebuilt, all);
        }
    }

    #[test]
    fn intent_edges_survive_the_split() {
        let graph = hundred_interactions();
        let data = split_edges(&graph, &spec(2, 5)).unwrap();
        assert_eq!(
            count_relation(&data.train_graph, RelationKind::UserPossessesIntent),
            count_relation(&graph, RelationKind::UserPossessesIntent),
        );
        assert_eq!(
            count_relation(&data.train_graph, RelationKind::ItemSatisfiesIntent),
            count_relation(&graph, RelationKind::ItemSatisfiesIntent),
        );
    }

    #[test]
    fn negatives_avoid_every_item_the_user_touched() {
        let graph = hundred_interactions();
        let mut interacted: HashMap<u64, HashSet<u64>> = HashMap::new();
        for (user, item) in consume_pairs(&graph) {
            interacted.entry(user).or_default().insert(item);
        }
        let data = split_edges(&graph, &spec(9, 10)).unwrap();
        for query in data.dev.iter().chain(&data.test) {
            // Every user has 5 of 25 items, so a pool of 20 remains.
            assert_eq!(query.negatives.len(), 10);
            let distinct: HashSet<u64> = query.negatives.iter().map(|n| n.0).collect();
            assert_eq!(distinct.len(), query.negatives.len());
            assert!(!distinct.contains(&query.positive.0));
            for item in &distinct {
                assert!(!interacted[&query.user.0].contains(item));
                let node = graph.node(NodeId(*item)).expect("sampled from the graph");
                assert_eq!(node.kind, NodeKind::Item);
            }
        }
    }

    #[test]
    fn negative_draws_stop_at_the_available_pool() {
        let graph = hundred_interactions();
        let data = split_edges(&graph, &spec(9, 99)).unwrap();
        for query in data.dev.iter().chain(&data.test) {
            assert_eq!(query.negatives.len(), 20);
        }
    }

    #[test]
    fn too_few_interactions_are_rejected() {
        let mut graph = IntentGraph::new();
        let user = graph.add_user("solo");
        for k in 0..9 {
            let item = graph.add_item(format!("item {k}"));
            graph
                .add_edge(user, item, RelationKind::UserConsumesItem, Provenance::NotApplicable)
                .unwrap();
        }
        match split_edges(&graph, &spec(0, 5)) {
            Err(EvalError::InsufficientEdges { found: 9, min: 10 }) => {}
            other => panic!("expected InsufficientEdges, got {other:?}"),
        }
    }

    #[test]
    fn malformed_specs_are_rejected() {
        let graph = hundred_interactions();
        let bad = [
            SplitSpec { ratios: (0.5, 0.2, 0.2), ..SplitSpec::default() },
            SplitSpec { ratios: (1.2, -0.1, -0.1), ..SplitSpec::default() },
            SplitSpec { eval_negatives: 0, ..SplitSpec::default() },
        ];
        for spec in bad {
            match split_edges(&graph, &spec) {
                Err(EvalError::InvalidSpec(_)) => {}
                other => panic!("expected InvalidSpec for {spec:?}, got {other:?}"),
            }
        }
    }
}

mod cold_start {
    use super::*;

    fn query(user: NodeId, positive: NodeId) -> EvalQuery {
        EvalQuery { user, positive, negatives: Vec::new() }
    }

    /// Training graph where the sparse user has 2 interactions, the dense
    /// user 4, the sparse item 1, and the dense item 3.
    fn degrees_fixture() -> (IntentGraph, [NodeId; 4]) {
        let mut graph = IntentGraph::new();
        let sparse_user = graph.add_user("sparse user");
        let dense_user = graph.add_user("dense user");
        let sparse_item = graph.add_item("sparse item");
        let dense_item = graph.add_item("dense item");
        let fillers: Vec<NodeId> = (0..4).map(|k| graph.add_item(format!("filler {k}"))).collect();
        let extras: Vec<NodeId> = (0..3).map(|k| graph.add_user(format!("extra {k}"))).collect();

        for &item in &fillers[..2] {
            graph
                .add_edge(sparse_user, item, RelationKind::UserConsumesItem, Provenance::NotApplicable)
                .unwrap();
        }
        for &item in &fillers {
            graph
                .add_edge(dense_user, item, RelationKind::UserConsumesItem, Provenance::NotApplicable)
                .unwrap();
        }
        graph
            .add_edge(extras[0], sparse_item, RelationKind::UserConsumesItem, Provenance::NotApplicable)
            .unwrap();
        for &user in &extras {
            graph
                .add_edge(user, dense_item, RelationKind::UserConsumesItem, Provenance::NotApplicable)
                .unwrap();
        }
        (graph, [sparse_user, dense_user, sparse_item, dense_item])
    }

    #[test]
    fn both_endpoints_must_be_sparse() {
        let (graph, [sparse_user, dense_user, sparse_item, dense_item]) = degrees_fixture();
        let queries = [
            query(sparse_user, sparse_item),
            query(dense_user, sparse_item),
            query(sparse_user, dense_item),
            query(dense_user, dense_item),
        ];
        let kept = cold_start_slice(&queries, &graph, 2).unwrap();
        assert_eq!(kept, vec![queries[0].clone()]);

        // At threshold 4 every endpoint qualifies.
        assert_eq!(cold_start_slice(&queries, &graph, 4).unwrap().len(), 4);
    }

    #[test]
    fn threshold_zero_keeps_only_unseen_endpoints() {
        let (mut graph, [sparse_user, _, sparse_item, _]) = degrees_fixture();
        let ghost_user = graph.add_user("ghost user");
        let ghost_item = graph.add_item("ghost item");
        let queries = [
            query(ghost_user, ghost_item),
            query(sparse_user, ghost_item),
            query(ghost_user, sparse_item),
        ];
        let kept = cold_start_slice(&queries, &graph, 0).unwrap();
        assert_eq!(kept, vec![queries[0].clone()]);
    }

    #[test]
    fn unknown_nodes_in_queries_are_errors() {
        let (graph, [sparse_user, ..]) = degrees_fixture();
        let queries = [query(sparse_user, NodeId(999))];
        match cold_start_slice(&queries, &graph, 5) {
            Err(EvalError::Graph(_)) => {}
            other => panic!("expected a graph error, got {other:?}"),
        }
    }
}

mod metrics {
    use super::*;

    #[test]
    fn reciprocal_ranks_follow_the_worked_example() {
        let report = compute_metrics(&[1, 2, 4], &DEFAULT_CUTOFFS, None).unwrap();
        assert!((report.mrr - 7.0 / 12.0).abs() < 1e-12);
        assert_eq!(report.n_queries, 3);
    }

    #[test]
    fn discounted_gain_at_rank_three_is_exactly_half() {
        let report = compute_metrics(&[3], &[5], None).unwrap();
        assert_eq!(report.ndcg[&5], 0.5);
        assert_eq!(report.hr[&5], 1.0);
    }

    #[test]
    fn ranks_beyond_the_cutoff_score_zero() {
        let report = compute_metrics(&[11], &DEFAULT_CUTOFFS, None).unwrap();
        for k in DEFAULT_CUTOFFS {
            assert_eq!(report.hr[&k], 0.0);
            assert_eq!(report.ndcg[&k], 0.0);
        }
        assert!((report.mrr - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_everywhere_is_a_perfect_report() {
        let report = compute_metrics(&[1, 1, 1], &DEFAULT_CUTOFFS, None).unwrap();
        for k in DEFAULT_CUTOFFS {
            assert_eq!(report.hr[&k], 1.0);
            assert_eq!(report.ndcg[&k], 1.0);
        }
        assert_eq!(report.mrr, 1.0);
    }

    #[test]
    fn hit_rate_is_monotone_in_the_cutoff_and_bounds_the_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let cutoffs = [1usize, 3, 5, 10, 20];
        for _ in 0..50 {
            let n = rng.gen_range(1..40);
            let ranks: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=30)).collect();
            let report = compute_metrics(&ranks, &cutoffs, None).unwrap();
            let mut previous = 0.0;
            for k in cutoffs {
                let hr = report.hr[&k];
                let ndcg = report.ndcg[&k];
                assert!(hr >= previous - 1e-12);
                assert!(ndcg <= hr + 1e-12);
                assert!((0.0..=1.0).contains(&hr));
                assert!((0.0..=1.0).contains(&ndcg));
                previous = hr;
            }
            assert!(report.mrr > 0.0 && report.mrr <= 1.0);
        }
    }

    #[test]
    fn aggregates_match_a_naive_rederivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..25 {
            let n = rng.gen_range(1..30);
            let ranks: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=25)).collect();
            let cutoffs = [2usize, 7, 12];
            let report = compute_metrics(&ranks, &cutoffs, None).unwrap();
            for k in cutoffs {
                let mut hits = 0.0;
                let mut gain = 0.0;
                for &r in &ranks {
                    if r <= k {
                        hits += 1.0;
                        gain += 1.0 / ((r + 1) as f64).log2();
                    }
                }
                assert!((report.hr[&k] - hits / n as f64).abs() < 1e-12);
                assert!((report.ndcg[&k] - gain / n as f64).abs() < 1e-12);
            }
            let mrr: f64 = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n as f64;
            assert!((report.mrr - mrr).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        match compute_metrics(&[], &DEFAULT_CUTOFFS, None) {
            Err(EvalError::EmptyQuerySet) => {}
            other => panic!("expected EmptyQuerySet, got {other:?}"),
        }
        match compute_metrics(&[1, 0], &DEFAULT_CUTOFFS, None) {
            Err(EvalError::InvalidRank) => {}
            other => panic!("expected InvalidRank, got {other:?}"),
        }
    }

    #[test]
    fn ties_rank_pessimistically() {
        assert_eq!(rank_of_positive(0.5, &[0.5, 0.4, 0.6]), 3);
        assert_eq!(rank_of_positive(1.0, &[]), 1);
        assert_eq!(rank_of_positive(0.2, &[0.1, 0.15]), 1);
        assert_eq!(rank_of_positive(0.3, &[0.3, 0.3, 0.3]), 4);
    }

    #[test]
    fn report_tables_list_every_metric() {
        let report =
            compute_metrics(&[1, 2, 4], &DEFAULT_CUTOFFS, Some("cold-start".into())).unwrap();

        let table = report.text_table();
        assert!(table.contains("slice: cold-start"));
        for label in ["HR@1", "HR@5", "HR@10", "NDCG@5", "NDCG@10", "MRR", "queries  3"] {
            assert!(table.contains(label), "missing {label} in:\n{table}");
        }
        assert!(!table.contains("NDCG@1 "));

        let lines = report.key_value_lines();
        for k in DEFAULT_CUTOFFS {
            assert!(lines.contains(&format!("hr@{k}={}", report.hr[&k])));
            assert!(lines.contains(&format!("ndcg@{k}={}", report.ndcg[&k])));
        }
        assert!(lines.contains(&format!("mrr={}", report.mrr)));
        assert!(lines.contains("n_queries=3"));
        assert!(lines.contains("slice=cold-start"));
    }

    #[test]
    fn scored_queries_aggregate_over_the_closure() {
        let queries = [
            EvalQuery {
                user: NodeId(1),
                positive: NodeId(10),
                negatives: vec![NodeId(11), NodeId(12)],
            },
            EvalQuery {
                user: NodeId(2),
                positive: NodeId(12),
                negatives: vec![NodeId(10), NodeId(11)],
            },
        ];
        // Lower ids score higher, so the first query ranks 1, the second 3.
        let report = evaluate_queries(&queries, &[1, 2], None, |_, item| {
            Ok(1000.0 - item.0 as f64)
        })
        .unwrap();
        assert_eq!(report.hr[&1], 0.5);
        assert_eq!(report.hr[&2], 0.5);
        assert!((report.mrr - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(report.n_queries, 2);
    }

    #[test]
    fn scoring_failures_abort_with_the_message() {
        let queries = [EvalQuery {
            user: NodeId(1),
            positive: NodeId(10),
            negatives: vec![NodeId(13)],
        }];
        let result = evaluate_queries(&queries, &[1], None, |_, item| {
            if item.0 == 13 {
                Err("item 13 has no embedding".to_string())
            } else {
                Ok(1.0)
            }
        });
        match result {
            Err(EvalError::Scoring(message)) => assert_eq!(message, "item 13 has no embedding"),
            other => panic!("expected Scoring, got {other:?}"),
        }

        match evaluate_queries(&[], &[1], None, |_, _| Ok(0.0)) {
            Err(EvalError::EmptyQuerySet) => {}
            other => panic!("expected EmptyQuerySet, got {other:?}"),
        }
    }
}

mod label_overlap {
    use super::*;

    fn labels(raw: &[&str]) -> Vec<String> {
        raw.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overlap_follows_the_set_formula() {
        let a = labels(&["open world", "crafting", "survival"]);
        let b = labels(&["crafting", "survival", "base building"]);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.5);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &labels(&["deck builder"])).unwrap(), 0.0);
    }

    #[test]
    fn overlap_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let vocabulary = ["l0", "l1", "l2", "l3", "l4", "l5"];
        for _ in 0..30 {
            let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
                vocabulary
                    .iter()
                    .filter(|_| rng.gen::<f64>() < 0.5)
                    .map(|s| s.to_string())
                    .collect()
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            match (jaccard(&a, &b), jaccard(&b, &a)) {
                (Ok(ab), Ok(ba)) => assert_eq!(ab, ba),
                (Err(EvalError::BothEmpty), Err(EvalError::BothEmpty)) => {}
                other => panic!("asymmetric outcome: {other:?}"),
            }
        }
    }

    #[test]
    fn casing_and_padding_do_not_split_labels() {
        let a = labels(&["Cozy Farming ", "cozy farming", "COZY FARMING"]);
        let b = labels(&["cozy farming"]);
        assert_eq!(jaccard(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn two_empty_sets_have_no_defined_overlap() {
        match jaccard(&[], &[]) {
            Err(EvalError::BothEmpty) => {}
            other => panic!("expected BothEmpty, got {other:?}"),
        }
        // Whitespace-only labels canonicalize to nothing.
        match jaccard(&labels(&["   "]), &labels(&[""])) {
            Err(EvalError::BothEmpty) => {}
            other => panic!("expected BothEmpty, got {other:?}"),
        }
    }

    #[test]
    fn report_averages_coefficients_and_canonical_sizes() {
        let pairs = vec![
            (
                labels(&["open world", "crafting", "survival"]),
                labels(&["crafting", "survival", "base building"]),
            ),
            (labels(&["roguelike", "Roguelike"]), labels(&["roguelike"])),
        ];
        let report = jaccard_report(&pairs).unwrap();
        assert!((report.mean_jaccard - 0.75).abs() < 1e-12);
        assert!((report.mean_size_a - 2.0).abs() < 1e-12);
        assert!((report.mean_size_b - 2.0).abs() < 1e-12);
        assert_eq!(report.pairs, 2);

        match jaccard_report(&[]) {
            Err(EvalError::EmptyQuerySet) => {}
            other => panic!("expected EmptyQuerySet, got {other:?}"),
        }
        match jaccard_report(&[(Vec::new(), Vec::new())]) {
            Err(EvalError::BothEmpty) => {}
            other => panic!("expected BothEmpty, got {other:?}"),
        }
    }
}

mod significance {
    use super::*;

    #[test]
    fn identical_runs_show_no_evidence_of_difference() {
        let runs = [0.3, 0.5, 0.7];
        let result = stat_compare(&runs, &runs, 500, 1).unwrap();
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.t_statistic, 0.0);
        assert_eq!(result.mean_diff, 0.0);
        assert_eq!(result.degrees, 2);
        assert!((result.mean_a - 0.5).abs() < 1e-12);

        // A constant metric collapses the bootstrap interval to a point.
        let flat = [0.4, 0.4, 0.4, 0.4];
        let result = stat_compare(&flat, &flat, 500, 1).unwrap();
        assert_eq!(result.ci, (0.4, 0.4));
    }

    #[test]
    fn paired_test_matches_frozen_references() {
        // Differences [0, 2]: t = 1 on 1 degree of freedom, p = 1/2.
        let result = stat_compare(&[0.0, 2.0], &[0.0, 0.0], 10, 0).unwrap();
        assert!((result.t_statistic - 1.0).abs() < 1e-12);
        assert!((result.p_value - 0.5).abs() < 1e-12);
        assert_eq!(result.degrees, 1);

        // Differences [(√3−1)/2, (√3+1)/2]: t = √3 on 1 degree, p = 1/3.
        let s = 3.0_f64.sqrt();
        let result =
            stat_compare(&[(s - 1.0) / 2.0, (s + 1.0) / 2.0], &[0.0, 0.0], 10, 0).unwrap();
        assert!((result.t_statistic - s).abs() < 1e-12);
        assert!((result.p_value - 1.0 / 3.0).abs() < 1e-12);

        // Differences [1, 1+√1.5, 1−√1.5]: t = √2 on 2 degrees, p = 1 − 1/√2.
        let r = 1.5_f64.sqrt();
        let result = stat_compare(&[1.0, 1.0 + r, 1.0 - r], &[0.0, 0.0, 0.0], 10, 0).unwrap();
        assert!((result.t_statistic - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((result.p_value - 0.2928932188134524).abs() < 1e-9);
        assert_eq!(result.degrees, 2);
        assert!((result.mean_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_nonzero_gap_is_degenerate() {
        match stat_compare(&[0.6, 0.6, 0.6], &[0.4, 0.4, 0.4], 10, 0) {
            Err(EvalError::DegenerateVariance(gap)) => assert!((gap - 0.2).abs() < 1e-12),
            other => panic!("expected DegenerateVariance, got {other:?}"),
        }
    }

    #[test]
    fn run_shape_is_validated() {
        match stat_compare(&[1.0], &[2.0], 10, 0) {
            Err(EvalError::TooFewRuns(1)) => {}
            other => panic!("expected TooFewRuns, got {other:?}"),
        }
        match stat_compare(&[], &[], 10, 0) {
            Err(EvalError::TooFewRuns(0)) => {}
            other => panic!("expected TooFewRuns, got {other:?}"),
        }
        match stat_compare(&[1.0, 2.0], &[1.0, 2.0, 3.0], 10, 0) {
            Err(EvalError::LengthMismatch(2, 3)) => {}
            other => panic!("expected LengthMismatch, got {other:?}"),
        }
        match stat_compare(&[1.0, 2.0], &[1.0, 2.0], 0, 0) {
            Err(EvalError::InvalidSpec(_)) => {}
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn a_real_shift_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let baseline: Vec<f64> = (0..12).map(|_| 0.5 + 0.02 * rng.gen::<f64>()).collect();
        let improved: Vec<f64> = baseline
            .iter()
            .map(|b| b + 0.1 + 0.01 * rng.gen::<f64>())
            .collect();
        let result = stat_compare(&improved, &baseline, 2000, 3).unwrap();
        assert!(result.p_value < 0.05, "p = {}", result.p_value);
        assert!(result.t_statistic > 0.0);
        assert!((result.mean_diff - 0.105).abs() < 0.01);
    }

    #[test]
    fn bootstrap_interval_is_seeded_and_covers_the_mean() {
        let a = [0.1, 0.9, 0.4, 0.7, 0.2, 0.6];
        let b = [0.0, 0.8, 0.5, 0.6, 0.1, 0.4];
        let first = stat_compare(&a, &b, 5000, 42).unwrap();
        let second = stat_compare(&a, &b, 5000, 42).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.resamples, 5000);

        assert!(first.ci.0 <= first.ci.1);
        assert!(first.ci.0 <= first.mean_a && first.mean_a <= first.ci.1);
        assert!(first.ci.0 >= 0.1 - 1e-12 && first.ci.1 <= 0.9 + 1e-12);

        let reseeded = stat_compare(&a, &b, 5000, 43).unwrap();
        assert_ne!(first.ci, reseeded.ci);
    }
}

mod ablation {
    use super::*;

    /// Four disjoint themes: each theme's users consume 3 of its 5 items and
    /// possess its intents, each item satisfies them. Interactions never
    /// cross themes, so intent overlap is a strong ranking signal.
    fn planted_graph() -> IntentGraph {
        let mut graph = IntentGraph::new();
        for theme in 0..4 {
            let users: Vec<NodeId> = (0..5)
                .map(|k| graph.add_user(format!("theme {theme} user {k}")))
                .collect();
            let items: Vec<NodeId> = (0..5)
                .map(|k| graph.add_item(format!("theme {theme} item {k}")))
                .collect();
            let exact = graph.intent(&format!("theme {theme} facet 0")).unwrap();
            let related = graph.intent(&format!("theme {theme} facet 1")).unwrap();
            for (k, &user) in users.iter().enumerate() {
                for j in 0..3 {
                    graph
                        .add_edge(
                            user,
                            items[(k + j) % 5],
                            RelationKind::UserConsumesItem,
                            Provenance::NotApplicable,
                        )
                        .unwrap();
                }
                graph
                    .add_edge(user, exact, RelationKind::UserPossessesIntent, Provenance::Exact)
                    .unwrap();
                graph
                    .add_edge(user, related, RelationKind::UserPossessesIntent, Provenance::Related)
                    .unwrap();
            }
            for &item in &items {
                graph
                    .add_edge(item, exact, RelationKind::ItemSatisfiesIntent, Provenance::Exact)
                    .unwrap();
                graph
                    .add_edge(item, related, RelationKind::ItemSatisfiesIntent, Provenance::Related)
                    .unwrap();
            }
        }
        graph
    }

    fn quick_config(dim: usize, epochs: usize) -> TrainConfig {
        TrainConfig {
            dim,
            learning_rate: 0.05,
            epochs,
            batch_size: 32,
            negatives_per_positive: 1,
            weight_decay: 1e-5,
            entity_norm_penalty: 1e-3,
            hyperplane_norm_penalty: 1e-3,
            conv_layers: 1,
            activation: Activation::Tanh,
            variant: ModelVariant::IntentPrior,
            seed: 17,
        }
    }

    #[test]
    fn variant_labels_round_trip() {
        for variant in AblationVariant::ALL {
            assert_eq!(AblationVariant::parse(variant.as_str()), Some(variant));
        }
        assert_eq!(AblationVariant::parse("nonsense"), None);
    }

    #[test]
    fn graph_transforms_strip_exactly_their_targets() {
        let graph = planted_graph();
        let original_edges = graph.edges().len();

        let without_related = drop_related_intent_edges(&graph);
        let related_intent = graph
            .edges()
            .iter()
            .filter(|e| e.relation.is_intent_relation() && e.provenance == Provenance::Related)
            .count();
        assert!(related_intent > 0);
        assert_eq!(without_related.edges().len(), original_edges - related_intent);
        assert!(without_related.edges().iter().all(|e| {
            !(e.relation.is_intent_relation() && e.provenance == Provenance::Related)
        }));
        without_related.check_consistency().unwrap();

        let without_intents = drop_intent_nodes(&graph);
        assert!(without_intents.edges().len() < without_related.edges().len());
        assert!(without_intents.nodes().all(|n| n.kind != NodeKind::Intent));
        assert!(without_intents
            .edges()
            .iter()
            .all(|e| e.relation == RelationKind::UserConsumesItem));
        assert_eq!(
            count_relation(&without_intents, RelationKind::UserConsumesItem),
            count_relation(&graph, RelationKind::UserConsumesItem),
        );
        without_intents.check_consistency().unwrap();

        // The source graph is untouched by either transform.
        assert_eq!(graph.edges().len(), original_edges);
    }

    #[test]
    fn every_variant_reports_on_the_same_queries() {
        let graph = planted_graph();
        let rows = run_ablation(
            &graph,
            &spec(3, 10),
            &quick_config(8, 3),
            &ScoreConfig::default(),
            &[1, 5],
            &AblationVariant::ALL,
        )
        .unwrap();
        assert_eq!(rows.len(), AblationVariant::ALL.len());
        let expected_queries = split_edges(&graph, &spec(3, 10)).unwrap().test.len();
        for row in &rows {
            let report = row
                .outcome
                .as_ref()
                .unwrap_or_else(|e| panic!("{} failed: {e}", row.variant.as_str()));
            assert_eq!(report.n_queries, expected_queries);
            for k in [1usize, 5] {
                assert!((0.0..=1.0).contains(&report.hr[&k]));
                assert!((0.0..=1.0).contains(&report.ndcg[&k]));
            }
            assert!(report.mrr > 0.0 && report.mrr <= 1.0);
        }
    }

    #[test]
    fn ablation_runs_are_deterministic() {
        let graph = planted_graph();
        let variants = [AblationVariant::IntPriorGnn, AblationVariant::VanillaGnn];
        let run = || {
            run_ablation(
                &graph,
                &spec(5, 8),
                &quick_config(8, 3),
                &ScoreConfig::default(),
                &[1, 5],
                &variants,
            )
            .unwrap()
        };
        let first = run();
        let second = run();
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.variant, b.variant);
            assert_eq!(a.outcome, b.outcome);
        }
    }

    #[test]
    fn intent_signal_lifts_ranking_quality() {
        let graph = planted_graph();
        let rows = run_ablation(
            &graph,
            &spec(7, 10),
            &quick_config(16, 20),
            &ScoreConfig::default(),
            &[1, 5],
            &[AblationVariant::IntPriorGnn, AblationVariant::NoIntent],
        )
        .unwrap();
        let full = rows[0].outcome.as_ref().expect("full system trains");
        let ablated = rows[1].outcome.as_ref().expect("intent-free system trains");
        assert!(
            full.mrr > ablated.mrr,
            "intent-aware MRR {} should beat intent-free MRR {}",
            full.mrr,
            ablated.mrr
        );
    }

    #[test]
    fn failed_variants_are_reported_in_place() {
        let graph = planted_graph();
        let doomed = TrainConfig {
            learning_rate: 1e200,
            weight_decay: 0.1,
            ..quick_config(4, 2)
        };
        let rows = run_ablation(
            &graph,
            &spec(1, 5),
            &doomed,
            &ScoreConfig::default(),
            &[1],
            &[AblationVariant::IntPriorGnn, AblationVariant::VanillaTrans],
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let message = row.outcome.as_ref().expect_err("training must diverge");
            assert!(message.contains("diverged"), "unexpected message: {message}");
        }
        let table = ablation_table_text(&rows, &[1]);
        assert!(table.contains("FAILED"));
    }

    #[test]
    fn table_text_lays_out_metrics_and_failures() {
        let report = compute_metrics(&[1, 2], &DEFAULT_CUTOFFS, None).unwrap();
        let rows = vec![
            AblationRow {
                variant: AblationVariant::IntPriorGnn,
                outcome: Ok(report),
            },
            AblationRow {
                variant: AblationVariant::NoIntent,
                outcome: Err("boom".into()),
            },
        ];
        let table = ablation_table_text(&rows, &DEFAULT_CUTOFFS);
        for label in ["variant", "HR@1", "HR@5", "HR@10", "NDCG@5", "NDCG@10", "MRR", "queries"] {
            assert!(table.contains(label), "missing {label} in:\n{table}");
        }
        assert!(!table.contains("NDCG@1 "));
        assert!(table.contains("int-prior-gnn"));
        assert!(table.contains("0.5000")); // HR@1 of ranks [1, 2]
        assert!(table.contains("FAILED: boom"));
    }
}
