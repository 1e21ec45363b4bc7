//! Scratch diagnostics for the directional acceptance criteria. Not shipped.

use std::collections::BTreeMap;
use std::path::Path;

use intentrec::embed::HashEncoder;
use intentrec::eval::{run_ablation, split_edges, AblationVariant, SplitSpec};
use intentrec::extract::MockCompletionClient;
use intentrec::graph::{IntentGraph, NodeKind, RelationKind};
use intentrec::model::{train, TrainConfig};
use intentrec::pipeline::{load_latest_graph, run_pipeline, Backends, PipelineConfig, Stage};
use intentrec::score::{ScoreConfig, Scorer};

fn bundled_config(base: &Path) -> PipelineConfig {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic");
    let text = format!(
        "interactions={}\nitems={}\nusers={}\nkb={}\nencoder_dim=16\n",
        data.join("interactions.tsv").display(),
        data.join("items.tsv").display(),
        data.join("users.tsv").display(),
        data.join("kb.tsv").display(),
    );
    PipelineConfig::from_text(&text, base).unwrap()
}

fn main() {
    let base = Path::new("/tmp/tune-workdir");
    std::fs::create_dir_all(base).unwrap();
    let config = bundled_config(base);
    let client = MockCompletionClient;
    let encoder = HashEncoder::new(16);
    let graph = match load_latest_graph(&config) {
        Ok(g) => g,
        Err(_) => {
            run_pipeline(
                &config,
                &[Stage::BuildKg, Stage::Densify],
                Backends {
                    completion: &client,
                    encoder: &encoder,
                },
            )
            .unwrap();
            load_latest_graph(&config).unwrap()
        }
    };

    // --- structure ---
    let mut counts: BTreeMap<NodeKind, usize> = BTreeMap::new();
    for n in graph.nodes() {
        *counts.entry(n.kind).or_default() += 1;
    }
    println!("nodes: {counts:?}");
    let mut rel_counts2: BTreeMap<String, usize> = BTreeMap::new();
    for e in graph.edges() {
        *rel_counts2
            .entry(format!("{:?}/{:?}", e.relation, e.provenance))
            .or_default() += 1;
    }
    println!("edges: {rel_counts2:#?}");

    // intent sets of one user and one item
    for label in ["user-t0-00", "user-t0-08", "farm meadow 0", "farm meadow 8"] {
        let node = graph.nodes().find(|n| n.label == label).unwrap();
        let mut intents: Vec<String> = graph
            .neighbors(node.id, None)
            .unwrap()
            .into_iter()
            .filter(|(id, rel)| {
                graph.node(*id).unwrap().kind == NodeKind::Intent
                    && matches!(
                        rel,
                        RelationKind::UserPossessesIntent | RelationKind::ItemSatisfiesIntent
                    )
            })
            .map(|(id, _)| graph.node(id).unwrap().label.clone())
            .collect();
        intents.sort();
        println!("{label}: {} intents: {intents:?}", intents.len());
    }

    // --- one split, one train, breakdowns ---
    let split_spec = SplitSpec {
        seed: 17,
        eval_negatives: 40,
        ..SplitSpec::default()
    };
    let split = split_edges(&graph, &split_spec).unwrap();
    let tc = TrainConfig {
        dim: 16,
        epochs: 20,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 17,
        ..TrainConfig::default()
    };
    let outcome = train(&split.train_graph, &tc).unwrap();
    println!(
        "loss first {:.4} last {:.4}",
        outcome.trace.first().unwrap().loss,
        outcome.trace.last().unwrap().loss
    );
    let scorer = Scorer::new(&split.train_graph, &outcome.params, &tc, ScoreConfig::default()).unwrap();
    for q in split.test.iter().take(4) {
        let user = graph.node(q.user).unwrap().label.clone();
        let pos = graph.node(q.positive).unwrap().label.clone();
        let b = scorer.hybrid_score(q.user, q.positive).unwrap();
        println!(
            "user {user} positive {pos}: y={:.3} z={:.3} final={:.3} penalized={}",
            b.intent_score, b.embed_score, b.final_score, b.penalty_applied
        );
        let mut better = 0;
        for &n in &q.negatives {
            let nb = scorer.hybrid_score(q.user, n).unwrap();
            if nb.final_score >= b.final_score {
                better += 1;
                if better <= 3 {
                    let nl = graph.node(n).unwrap().label.clone();
                    println!(
                        "   beaten by {nl}: y={:.3} z={:.3} final={:.3} penalized={}",
                        nb.intent_score, nb.embed_score, nb.final_score, nb.penalty_applied
                    );
                }
            }
        }
        println!("   rank = {}", better + 1);
    }

    // --- grid over training constants ---
    let variants = [
        AblationVariant::IntPriorGnn,
        AblationVariant::NoRelatedIntent,
        AblationVariant::NoIntent,
    ];
    for (dim, epochs, lr) in [
        (16usize, 20usize, 0.05f64),
        (16, 60, 0.05),
        (32, 40, 0.02),
        (16, 40, 0.02),
    ] {
        let mut mrr: BTreeMap<AblationVariant, Vec<f64>> = BTreeMap::new();
        for seed in [17u64, 29, 41, 53, 65] {
            let split = SplitSpec {
                seed,
                eval_negatives: 40,
                ..SplitSpec::default()
            };
            let tc = TrainConfig {
                dim,
                epochs,
                learning_rate: lr,
                batch_size: 32,
                seed,
                ..TrainConfig::default()
            };
            let rows = run_ablation(
                &graph,
                &split,
                &tc,
                &ScoreConfig::default(),
                &[1, 5, 10],
                &variants,
            )
            .unwrap();
            for row in rows {
                mrr.entry(row.variant)
                    .or_default()
                    .push(row.outcome.expect("variant runs").mrr);
            }
        }
        print!("dim={dim} epochs={epochs} lr={lr}:");
        for (v, xs) in &mrr {
            print!("  {v:?}={:.4}", xs.iter().sum::<f64>() / xs.len() as f64);
        }
        println!();
    }
}
