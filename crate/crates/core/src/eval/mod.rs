//! Offline evaluation of a trained recommender.
//!
//! Covers the whole measurement protocol: seeded 8:1:1 interaction splits
//! with sampled evaluation negatives, leave-one-out ranking metrics
//! (HR@k, NDCG@k, MRR), cold-start slicing, label-set Jaccard comparisons,
//! one-toggle-at-a-time ablations, and paired significance testing with a
//! bootstrap confidence interval.

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::score::ScoreError;

mod ablation;
mod metrics;
mod split;
mod stats;

#[cfg(test)]
mod tests;

pub use ablation::{
    ablation_table_text, drop_intent_nodes, drop_related_intent_edges, run_ablation,
    AblationRow, AblationVariant,
};
pub use metrics::{
    compute_metrics, evaluate_queries, rank_of_positive, EvalReport, DEFAULT_CUTOFFS,
};
pub use split::{cold_start_slice, split_edges, DataSplit, EvalQuery, SplitSpec};
pub use stats::{
    jaccard, jaccard_report, stat_compare, JaccardReport, StatComparison,
    DEFAULT_RESAMPLES,
};

/// Errors raised by the evaluation harness.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// A spec or parameter violates its own contract.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    /// Too few interaction edges to carve out dev and test sets.
    #[error("need at least {min} interaction edges to split, found {found}")]
    InsufficientEdges { found: usize, min: usize },
    /// Metrics over zero queries are undefined.
    #[error("metric computation needs at least one query")]
    EmptyQuerySet,
    /// Ranks are 1-based.
    #[error("ranks must be at least 1")]
    InvalidRank,
    /// Jaccard similarity of two empty sets is undefined.
    #[error("jaccard of two empty label sets is undefined")]
    BothEmpty,
    /// Paired tests need at least two runs.
    #[error("paired comparison needs at least two runs, got {0}")]
    TooFewRuns(usize),
    /// Paired tests need runs of equal length.
    #[error("paired runs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// Every paired difference is the same non-zero value; the t statistic
    /// has no variance to divide by.
    #[error("all paired differences equal {0}; t statistic undefined")]
    DegenerateVariance(f64),
    /// A candidate failed to score during ranking evaluation.
    #[error("scoring failed during evaluation: {0}")]
    Scoring(String),
    /// Bubbled up from graph surgery.
    #[error(transparent)]
    Graph(#[from] GraphError),
    /// Bubbled up from model training or inference.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Bubbled up from the scoring layer.
    #[error(transparent)]
    Score(#[from] ScoreError),
}
