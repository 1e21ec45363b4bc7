use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{IntentGraph, NodeId, Provenance, RelationKind};
use crate::model::{ModelError, ModelParameters, ModelVariant, TrainConfig};

use super::*;

/// Cosine recomputed independently for oracle use.
fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for k in 0..a.len() {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Parameters whose entity rows are exactly the given vectors; paired with
/// the zero-depth config below, convolved embeddings equal these rows.
fn params_with_entities(rows: Vec<Vec<f64>>) -> ModelParameters {
    let d = rows[0].len();
    ModelParameters {
        dim: d,
        entities: rows,
        relations: vec![vec![0.0; d]; 5],
        hyperplanes: vec![vec![0.0; d]; 5],
        conv_weight: (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        conv_bias: vec![0.0; d],
    }
}

/// Config whose variant runs zero convolution layers, pinning embeddings.
fn raw_config(dim: usize) -> TrainConfig {
    TrainConfig {
        dim,
        variant: ModelVariant::VanillaTranslation,
        ..TrainConfig::default()
    }
}

fn feature(label: &str, embedding: &[f64]) -> IntentFeature {
    IntentFeature {
        label: label.to_string(),
        embedding: embedding.to_vec(),
    }
}

/// One user, three items: `fit` shares the user's intent, `near` offers a
/// disjoint but semantically close one, `bare` has no intents at all.
struct Fixture {
    graph: IntentGraph,
    params: ModelParameters,
    user: NodeId,
    fit: NodeId,
    near: NodeId,
    bare: NodeId,
}

fn fixture() -> Fixture {
    let mut graph = IntentGraph::new();
    let user = graph.add_user("alice");
    let fit = graph.add_item("harvest valley");
    let near = graph.add_item("orchard story");
    let bare = graph.add_item("grey box");
    let cozy = graph.intent("cozy farming").unwrap();
    let ranch = graph.intent("ranch sim").unwrap();
    graph
        .add_edge(user, bare, RelationKind::UserConsumesItem, Provenance::NotApplicable)
        .unwrap();
    graph
        .add_edge(user, cozy, RelationKind::UserPossessesIntent, Provenance::Exact)
        .unwrap();
    graph
        .add_edge(fit, cozy, RelationKind::ItemSatisfiesIntent, Provenance::Exact)
        .unwrap();
    graph
        .add_edge(near, ranch, RelationKind::ItemSatisfiesIntent, Provenance::Related)
        .unwrap();
    // Positions follow ascending node id: user, fit, near, bare, cozy, ranch.
    let params = params_with_entities(vec![
        vec![1.0, 0.0],   // user
        vec![0.6, 0.8],   // fit
        vec![0.6, 0.8],   // near
        vec![0.0, 1.0],   // bare
        vec![1.0, 0.0],   // cozy
        vec![0.8, 0.6],   // ranch
    ]);
    Fixture {
        graph,
        params,
        user,
        fit,
        near,
        bare,
    }
}

// ---------------------------------------------------------------------------
// embedding cosine
// ---------------------------------------------------------------------------

#[test]
fn embed_score_matches_worked_examples() {
    assert_eq!(embed_score(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(embed_score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_eq!(embed_score(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
}

#[test]
fn embed_score_rejects_zero_vectors() {
    assert!(matches!(
        embed_score(&[0.0, 0.0], &[1.0, 0.0]),
        Err(ScoreError::ZeroVector)
    ));
    assert!(matches!(
        embed_score(&[1.0, 0.0], &[0.0, 0.0]),
        Err(ScoreError::ZeroVector)
    ));
}

#[test]
fn embed_score_stays_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if a.iter().all(|x| *x == 0.0) || b.iter().all(|x| *x == 0.0) {
            continue;
        }
        let z = embed_score(&a, &b).unwrap();
        assert!((-1.0..=1.0).contains(&z));
    }
}

// ---------------------------------------------------------------------------
// intent score
// ---------------------------------------------------------------------------

#[test]
fn shared_intent_with_identical_embedding_scores_one() {
    let omega_u = [feature("combat", &[1.0, 0.0])];
    let omega_i = [
        feature("crafting", &[0.0, 1.0]),
        feature("combat", &[1.0, 0.0]),
    ];
    let (y, penalty) = intent_score(&omega_u, &omega_i, DEFAULT_OVERLAP_PENALTY);
    assert_eq!(y, 1.0);
    assert!(!penalty);
}

#[test]
fn disjoint_labels_halve_the_best_pair() {
    let omega_u = [feature("exploration", &[1.0, 0.0])];
    let omega_i = [feature("open world", &[0.8, 0.6])];
    let (y, penalty) = intent_score(&omega_u, &omega_i, DEFAULT_OVERLAP_PENALTY);
    assert!((y - 0.4).abs() <= 1e-12);
    assert!(penalty);
}

#[test]
fn empty_intent_sets_score_zero_with_penalty() {
    let some = [feature("combat", &[1.0, 0.0])];
    for (u, i) in [(&some[..], &[][..]), (&[][..], &some[..]), (&[][..], &[][..])] {
        let (y, penalty) = intent_score(u, i, DEFAULT_OVERLAP_PENALTY);
        assert_eq!(y, 0.0);
        assert!(penalty);
    }
}

#[test]
fn label_overlap_suppresses_penalty_regardless_of_embeddings() {
    // The shared label keeps the penalty off even though the best pair is
    // orthogonal.
    let omega_u = [feature("combat", &[1.0, 0.0])];
    let omega_i = [feature("combat", &[0.0, 1.0])];
    let (y, penalty) = intent_score(&omega_u, &omega_i, DEFAULT_OVERLAP_PENALTY);
    assert_eq!(y, 0.0);
    assert!(!penalty);
}

#[test]
fn intent_score_matches_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let labels = ["l0", "l1", "l2", "l3", "l4", "l5"];
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<IntentFeature> {
            (0..n)
                .map(|_| {
                    let label = labels[rng.gen_range(0..labels.len())];
                    let embedding: Vec<f64> =
                        (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    feature(label, &embedding)
                })
                .collect()
        };
        let omega_u = draw(&mut rng, 3);
        let omega_i = draw(&mut rng, 4);
        let (got, got_penalty) = intent_score(&omega_u, &omega_i, DEFAULT_OVERLAP_PENALTY);

        let u_labels: HashSet<&str> = omega_u.iter().map(|f| f.label.as_str()).collect();
        let i_labels: HashSet<&str> = omega_i.iter().map(|f| f.label.as_str()).collect();
        let disjoint = u_labels.is_disjoint(&i_labels);
        let mut best = f64::NEG_INFINITY;
        for fu in &omega_u {
            for fi in &omega_i {
                let c = oracle_cosine(&fu.embedding, &fi.embedding);
                if c > best {
                    best = c;
                }
            }
        }
        let want = if disjoint { best * 0.5 } else { best };
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        assert_eq!(got_penalty, disjoint);
    }
}

// ---------------------------------------------------------------------------
// hybrid scoring
// ---------------------------------------------------------------------------

#[test]
fn hybrid_mixture_follows_the_formula() {
    assert!((0.8 + 0.1 * 0.5 - 0.85f64).abs() <= 1e-12);
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let b = scorer.hybrid_score(fx.user, fx.fit).unwrap();
    assert!(
        (b.final_score - (b.intent_score + 0.1 * b.embed_score)).abs() <= 1e-12
    );
    // Shared canonical label "cozy farming" with identical embeddings.
    assert_eq!(b.intent_score, 1.0);
    assert!(!b.penalty_applied);
    // z = cos([1,0], [0.6,0.8]) = 0.6.
    assert!((b.embed_score - 0.6).abs() <= 1e-12);
}

#[test]
fn disjoint_and_missing_intents_propagate_into_the_breakdown() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    // "cozy farming" vs "ranch sim": disjoint, best cosine 0.8, halved.
    let near = scorer.hybrid_score(fx.user, fx.near).unwrap();
    assert!((near.intent_score - 0.4).abs() <= 1e-12);
    assert!(near.penalty_applied);
    // No intents at all: y = 0, flagged.
    let bare = scorer.hybrid_score(fx.user, fx.bare).unwrap();
    assert_eq!(bare.intent_score, 0.0);
    assert!(bare.penalty_applied);
}

#[test]
fn lambda_zero_scores_by_intent_alone() {
    let fx = fixture();
    let config = ScoreConfig {
        lambda: 0.0,
        ..ScoreConfig::default()
    };
    let scorer = Scorer::new(&fx.graph, &fx.params, &raw_config(2), config).unwrap();
    let b = scorer.hybrid_score(fx.user, fx.near).unwrap();
    assert_eq!(b.final_score, b.intent_score);
}

#[test]
fn raising_lambda_never_lowers_a_positive_cosine_score() {
    let fx = fixture();
    let mut last = f64::NEG_INFINITY;
    for lambda in [0.0, 0.1, 0.5, 1.0] {
        let config = ScoreConfig {
            lambda,
            ..ScoreConfig::default()
        };
        let scorer = Scorer::new(&fx.graph, &fx.params, &raw_config(2), config).unwrap();
        let b = scorer.hybrid_score(fx.user, fx.fit).unwrap();
        assert!(b.embed_score > 0.0);
        assert!(b.final_score >= last);
        last = b.final_score;
    }
}

#[test]
fn default_knobs_match_the_tuned_values() {
    let config = ScoreConfig::default();
    assert_eq!(config.lambda, 0.1);
    assert_eq!(config.overlap_penalty, 0.5);
}

#[test]
fn scorer_rejects_mismatched_parameters() {
    let fx = fixture();
    let short = params_with_entities(vec![vec![1.0, 0.0]; 2]);
    assert!(matches!(
        Scorer::new(&fx.graph, &short, &raw_config(2), ScoreConfig::default()),
        Err(ScoreError::Model(ModelError::DimensionMismatch { .. }))
    ));
}

// ---------------------------------------------------------------------------
// ranking
// ---------------------------------------------------------------------------

#[test]
fn singleton_request_ranks_first() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.near],
            cutoff: 10,
        })
        .unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].item, fx.near);
    assert!(out[0].breakdown.is_some());
}

#[test]
fn ranking_orders_by_final_score() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.bare, fx.near, fx.fit],
            cutoff: 3,
        })
        .unwrap();
    let order: Vec<NodeId> = out.iter().map(|r| r.item).collect();
    assert_eq!(order, vec![fx.fit, fx.near, fx.bare]);
    let finals: Vec<f64> = out
        .iter()
        .map(|r| r.breakdown.as_ref().unwrap().final_score)
        .collect();
    assert!(finals[0] > finals[1] && finals[1] > finals[2]);
}

#[test]
fn equal_scores_break_ties_by_ascending_id() {
    let mut graph = IntentGraph::new();
    let user = graph.add_user("u");
    let twin_a = graph.add_item("twin a");
    let twin_b = graph.add_item("twin b");
    let cozy = graph.intent("cozy farming").unwrap();
    graph
        .add_edge(user, cozy, RelationKind::UserPossessesIntent, Provenance::Exact)
        .unwrap();
    for item in [twin_a, twin_b] {
        graph
            .add_edge(item, cozy, RelationKind::ItemSatisfiesIntent, Provenance::Exact)
            .unwrap();
    }
    // Identical rows for the twins make their breakdowns exactly equal.
    let params = params_with_entities(vec![
        vec![1.0, 0.0],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![1.0, 0.0],
    ]);
    let scorer =
        Scorer::new(&graph, &params, &raw_config(2), ScoreConfig::default()).unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user,
            candidates: vec![twin_b, twin_a],
            cutoff: 2,
        })
        .unwrap();
    assert_eq!(out[0].item, twin_a);
    assert_eq!(out[1].item, twin_b);
    assert_eq!(out[0].breakdown, out[1].breakdown);
}

#[test]
fn candidate_order_does_not_affect_the_ranking() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let forward = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.fit, fx.near, fx.bare],
            cutoff: 3,
        })
        .unwrap();
    let backward = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.bare, fx.near, fx.fit],
            cutoff: 3,
        })
        .unwrap();
    assert_eq!(forward, backward);
}

#[test]
fn failed_candidates_sink_below_scored_ones() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![NodeId(999), fx.near],
            cutoff: 5,
        })
        .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].item, fx.near);
    assert!(out[0].breakdown.is_some());
    assert_eq!(out[1].item, NodeId(999));
    assert!(out[1].breakdown.is_none());
}

#[test]
fn zero_embeddings_flag_the_candidate() {
    let mut graph = IntentGraph::new();
    let user = graph.add_user("u");
    let blank = graph.add_item("blank");
    graph
        .add_edge(user, blank, RelationKind::UserConsumesItem, Provenance::NotApplicable)
        .unwrap();
    let params = params_with_entities(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    let scorer =
        Scorer::new(&graph, &params, &raw_config(2), ScoreConfig::default()).unwrap();
    assert!(matches!(
        scorer.hybrid_score(user, blank),
        Err(ScoreError::ZeroVector)
    ));
    let out = scorer
        .rank(&RankingRequest {
            user,
            candidates: vec![blank],
            cutoff: 1,
        })
        .unwrap();
    assert!(out[0].breakdown.is_none());
}

#[test]
fn cutoff_truncates_the_tail() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.fit, fx.near, fx.bare],
            cutoff: 2,
        })
        .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].item, fx.fit);
}

#[test]
fn invalid_requests_are_rejected() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    assert!(matches!(
        scorer.rank(&RankingRequest {
            user: fx.user,
            candidates: vec![],
            cutoff: 3,
        }),
        Err(ScoreError::InvalidRequest(_))
    ));
    assert!(matches!(
        scorer.rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.fit],
            cutoff: 0,
        }),
        Err(ScoreError::InvalidRequest(_))
    ));
}

#[test]
fn ranking_is_invariant_under_positive_affine_transforms() {
    let fx = fixture();
    let scorer = Scorer::new(
        &fx.graph,
        &fx.params,
        &raw_config(2),
        ScoreConfig::default(),
    )
    .unwrap();
    let out = scorer
        .rank(&RankingRequest {
            user: fx.user,
            candidates: vec![fx.fit, fx.near, fx.bare],
            cutoff: 3,
        })
        .unwrap();
    let mut transformed: Vec<(NodeId, f64)> = out
        .iter()
        .map(|r| {
            let f = r.breakdown.as_ref().unwrap().final_score;
            (r.item, 3.5 * f + 11.0)
        })
        .collect();
    transformed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let order: Vec<NodeId> = out.iter().map(|r| r.item).collect();
    let affine_order: Vec<NodeId> = transformed.iter().map(|t| t.0).collect();
    assert_eq!(order, affine_order);
}

#[test]
fn convolved_embeddings_feed_the_scorer() {
    // With one convolution layer the embeddings move; the scorer must read
    // the moved ones, matching a direct model-layer recomputation.
    let fx = fixture();
    let config = TrainConfig {
        dim: 2,
        conv_layers: 1,
        ..TrainConfig::default()
    };
    let scorer =
        Scorer::new(&fx.graph, &fx.params, &config, ScoreConfig::default()).unwrap();
    let index = crate::model::ModelIndex::build(&fx.graph);
    let convolved =
        crate::model::full_conv(&index, &fx.params, 1, config.activation).unwrap();
    let u = index.require(fx.user).unwrap();
    let i = index.require(fx.fit).unwrap();
    let b = scorer.hybrid_score(fx.user, fx.fit).unwrap();
    assert_eq!(
        b.embed_score,
        embed_score(&convolved[u], &convolved[i]).unwrap()
    );
    assert_eq!(scorer.embedding(fx.user).unwrap(), convolved[u].as_slice());
}
