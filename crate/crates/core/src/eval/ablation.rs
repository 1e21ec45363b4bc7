//! One-toggle-at-a-time ablation runs.

use std::fmt::Write as _;

use crate::graph::{IntentGraph, NodeId, NodeKind, Provenance};
use crate::model::{self, ForwardContext, ModelVariant, RelationSlot, TrainConfig};
use crate::score::{ScoreConfig, Scorer};

use super::metrics::{evaluate_queries, EvalReport};
use super::split::{split_edges, DataSplit, SplitSpec};
use super::EvalError;

/// Every ablation toggles exactly one aspect of the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AblationVariant {
    /// The full system: intent-prior relations, convolution, hybrid scoring.
    IntPriorGnn,
    /// Translation layer replaced by a plain two-layer convolution scored by
    /// the dot product.
    VanillaGnn,
    /// Convolution and hybrid scoring removed: the translation layer alone.
    VanillaTrans,
    /// Full training, but scored by negative translation energy instead of
    /// the hybrid mixture.
    VanillaScoring,
    /// Related-provenance intent edges removed from the training graph.
    NoRelatedIntent,
    /// Every intent node removed from the training graph.
    NoIntent,
}

/// How a variant scores a `(user, item)` pair at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScoringRule {
    /// Intent mixture: y + λ·z.
    Hybrid,
    /// The model's own triple plausibility.
    Plausibility,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::IntPriorGnn,
        AblationVariant::VanillaGnn,
        AblationVariant::VanillaTrans,
        AblationVariant::VanillaScoring,
        AblationVariant::NoRelatedIntent,
        AblationVariant::NoIntent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationVariant::IntPriorGnn => "int-prior-gnn",
            AblationVariant::VanillaGnn => "vanilla-gnn",
            AblationVariant::VanillaTrans => "vanilla-trans",
            AblationVariant::VanillaScoring => "vanilla-scoring",
            AblationVariant::NoRelatedIntent => "no-related-intent",
            AblationVariant::NoIntent => "no-intent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.as_str() == s)
    }

    fn model_variant(self) -> ModelVariant {
        match self {
            AblationVariant::VanillaGnn => ModelVariant::VanillaGnn,
            AblationVariant::VanillaTrans => ModelVariant::VanillaTranslation,
            _ => ModelVariant::IntentPrior,
        }
    }

    fn scoring(self) -> ScoringRule {
        match self {
            AblationVariant::IntPriorGnn
            | AblationVariant::NoRelatedIntent
            | AblationVariant::NoIntent => ScoringRule::Hybrid,
            AblationVariant::VanillaGnn
            | AblationVariant::VanillaTrans
            | AblationVariant::VanillaScoring => ScoringRule::Plausibility,
        }
    }
}

/// Copy of the graph without Related-provenance intent edges.
pub fn drop_related_intent_edges(graph: &IntentGraph) -> IntentGraph {
    let mut out = graph.clone();
    let doomed: Vec<_> = graph
        .edges()
        .iter()
        .filter(|e| e.relation.is_intent_relation() && e.provenance == Provenance::Related)
        .map(|e| (e.head, e.tail, e.relation))
        .collect();
    for (head, tail, relation) in doomed {
        out.remove_edge(head, tail, relation)
            .expect("edge enumerated from the same graph");
    }
    out
}

/// Copy of the graph without intent nodes (or their edges).
pub fn drop_intent_nodes(graph: &IntentGraph) -> IntentGraph {
    let mut out = graph.clone();
    let doomed: Vec<NodeId> = graph
        .nodes()
        .filter(|node| node.kind == NodeKind::Intent)
        .map(|node| node.id)
        .collect();
    for id in doomed {
        out.remove_node(id)
            .expect("node enumerated from the same graph");
    }
    out
}

/// One table row: the variant and its test-split report, or the failure
/// that kept it from finishing.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub outcome: Result<EvalReport, String>,
}

/// Split once, then train and evaluate every variant on identical queries.
/// Per-variant failures are recorded in the table instead of aborting the
/// other runs.
pub fn run_ablation(
    graph: &IntentGraph,
    split: &SplitSpec,
    train: &TrainConfig,
    score: &ScoreConfig,
    cutoffs: &[usize],
    variants: &[AblationVariant],
) -> Result<Vec<AblationRow>, EvalError> {
    let data = split_edges(graph, split)?;
    Ok(variants
        .iter()
        .map(|&variant| AblationRow {
            variant,
            outcome: run_variant(variant, &data, train, score, cutoffs)
                .map_err(|e| e.to_string()),
        })
        .collect())
}

fn run_variant(
    variant: AblationVariant,
    data: &DataSplit,
    train: &TrainConfig,
    score: &ScoreConfig,
    cutoffs: &[usize],
) -> Result<EvalReport, EvalError> {
    let graph = match variant {
        AblationVariant::NoRelatedIntent => drop_related_intent_edges(&data.train_graph),
        AblationVariant::NoIntent => drop_intent_nodes(&data.train_graph),
        _ => data.train_graph.clone(),
    };
    let config = TrainConfig {
        variant: variant.model_variant(),
        ..train.clone()
    };
    let outcome = model::train(&graph, &config)?;
    match variant.scoring() {
        ScoringRule::Hybrid => {
            let scorer = Scorer::new(&graph, &outcome.params, &config, *score)?;
            evaluate_queries(&data.test, cutoffs, None, |user, item| {
                scorer
                    .hybrid_score(user, item)
                    .map(|b| b.final_score)
                    .map_err(|e| e.to_string())
            })
        }
        ScoringRule::Plausibility => {
            let ctx = ForwardContext::new(&outcome.index, &outcome.params, &config)?;
            evaluate_queries(&data.test, cutoffs, None, |user, item| {
                let head = outcome.index.require(user).map_err(|e| e.to_string())?;
                let tail = outcome.index.require(item).map_err(|e| e.to_string())?;
                ctx.triple_plausibility(
                    &outcome.index,
                    &outcome.params,
                    config.variant,
                    head,
                    tail,
                    RelationSlot::Consumes,
                )
                .map_err(|e| e.to_string())
            })
        }
    }
}

/// Aligned text table over the rows: HR at every cutoff, NDCG at cutoffs
/// past 1, then MRR; failed variants carry the failure message.
pub fn ablation_table_text(rows: &[AblationRow], cutoffs: &[usize]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<18}", "variant");
    for k in cutoffs {
        let _ = write!(out, " {:>8}", format!("HR@{k}"));
    }
    for k in cutoffs {
        if *k > 1 {
            let _ = write!(out, " {:>8}", format!("NDCG@{k}"));
        }
    }
    let _ = writeln!(out, " {:>8} {:>8}", "MRR", "queries");
    for row in rows {
        let _ = write!(out, "{:<18}", row.variant.as_str());
        match &row.outcome {
            Ok(report) => {
                for k in cutoffs {
                    let _ = write!(out, " {:>8.4}", report.hr.get(k).copied().unwrap_or(f64::NAN));
                }
                for k in cutoffs {
                    if *k > 1 {
                        let _ = write!(
                            out,
                            " {:>8.4}",
                            report.ndcg.get(k).copied().unwrap_or(f64::NAN)
                        );
                    }
                }
                let _ = writeln!(out, " {:>8.4} {:>8}", report.mrr, report.n_queries);
            }
            Err(message) => {
                let _ = writeln!(out, " FAILED: {message}");
            }
        }
    }
    out
}
