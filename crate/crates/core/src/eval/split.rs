//! Interaction splitting and cold-start slicing.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{IntentGraph, NodeId, NodeKind, RelationKind};

use super::EvalError;

/// Smallest interaction set that still yields non-empty dev and test splits.
const MIN_POSITIVES: usize = 10;

/// How interactions are partitioned and evaluation candidates drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// (train, dev, test) fractions; must sum to 1.
    pub ratios: (f64, f64, f64),
    /// Seed for the shuffle and all negative sampling.
    pub seed: u64,
    /// Sampled non-interacted items per held-out positive.
    pub eval_negatives: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: (0.8, 0.1, 0.1),
            seed: 17,
            eval_negatives: 99,
        }
    }
}

impl SplitSpec {
    /// Reject impossible ratios or a zero negative budget. Called by
    /// [`split_edges`]; also useful for validating configuration up front.
    pub fn validate(&self) -> Result<(), EvalError> {
        let (a, b, c) = self.ratios;
        if a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(EvalError::InvalidSpec("split ratios must be non-negative".into()));
        }
        if (a + b + c - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSpec(format!(
                "split ratios must sum to 1, got {}",
                a + b + c
            )));
        }
        if self.eval_negatives == 0 {
            return Err(EvalError::InvalidSpec(
                "eval_negatives must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One leave-one-out ranking query: the held-out positive plus sampled
/// items the user never interacted with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalQuery {
    pub user: NodeId,
    pub positive: NodeId,
    pub negatives: Vec<NodeId>,
}

/// Output of [`split_edges`]: the graph with held-out interactions removed
/// (intent edges untouched) and the two query sets.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train_graph: IntentGraph,
    pub dev: Vec<EvalQuery>,
    pub test: Vec<EvalQuery>,
}

/// Partition interaction edges by seeded shuffle, remove the held-out ones
/// from a copy of the graph, and draw negative candidates for every held-out
/// positive from the items its user never interacted with anywhere.
pub fn split_edges(graph: &IntentGraph, spec: &SplitSpec) -> Result<DataSplit, EvalError> {
    spec.validate()?;
    let positives: Vec<(NodeId, NodeId)> = graph
        .edges()
        .iter()
        .filter(|e| e.relation == RelationKind::UserConsumesItem)
        .map(|e| (e.head, e.tail))
        .collect();
    if positives.len() < MIN_POSITIVES {
        return Err(EvalError::InsufficientEdges {
            found: positives.len(),
            min: MIN_POSITIVES,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..positives.len()).collect();
    order.shuffle(&mut rng);
    let n = positives.len();
    let n_dev = ((n as f64) * spec.ratios.1).round() as usize;
    let n_test = (((n as f64) * spec.ratios.2).round() as usize).min(n - n_dev);
    let dev_idx = &order[..n_dev];
    let test_idx = &order[n_dev..n_dev + n_test];

    let mut train_graph = graph.clone();
    for &k in dev_idx.iter().chain(test_idx) {
        let (user, item) = positives[k];
        train_graph.remove_edge(user, item, RelationKind::UserConsumesItem)?;
    }

    // Negatives must avoid everything the user interacted with in ANY split.
    let mut interacted: HashMap<NodeId, HashSet<NodeId>> = HashMap::new();
    for (user, item) in &positives {
        interacted.entry(*user).or_default().insert(*item);
    }
    let all_items: Vec<NodeId> = graph
        .nodes()
        .filter(|node| node.kind == NodeKind::Item)
        .map(|node| node.id)
        .collect();

    let mut draw = |idxs: &[usize], rng: &mut ChaCha8Rng| -> Vec<EvalQuery> {
        idxs.iter()
            .map(|&k| {
                let (user, positive) = positives[k];
                let seen = &interacted[&user];
                let mut pool: Vec<NodeId> = all_items
                    .iter()
                    .copied()
                    .filter(|item| !seen.contains(item))
                    .collect();
                pool.shuffle(rng);
                pool.truncate(spec.eval_negatives);
                EvalQuery {
                    user,
                    positive,
                    negatives: pool,
                }
            })
            .collect()
    };
    let dev = draw(dev_idx, &mut rng);
    let test = draw(test_idx, &mut rng);

    Ok(DataSplit {
        train_graph,
        dev,
        test,
    })
}

/// Keep only queries whose user AND positive item have at most `threshold`
/// training interactions. An empty slice is a legitimate outcome.
pub fn cold_start_slice(
    queries: &[EvalQuery],
    train_graph: &IntentGraph,
    threshold: usize,
) -> Result<Vec<EvalQuery>, EvalError> {
    let mut kept = Vec::new();
    for q in queries {
        let user_deg =
            train_graph.degree_by_relation(q.user, RelationKind::UserConsumesItem)?;
        let item_deg =
            train_graph.degree_by_relation(q.positive, RelationKind::UserConsumesItem)?;
        if user_deg <= threshold && item_deg <= threshold {
            kept.push(q.clone());
        }
    }
    Ok(kept)
}
