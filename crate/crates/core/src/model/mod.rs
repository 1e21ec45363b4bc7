//! The trainable graph model.
//!
//! Architecture, in forward order:
//! 1. **KG convolution** — each node's embedding is refreshed from its
//!    neighborhood with per-neighbor scalar attention (the score of neighbor
//!    `j` is `r_j · e_j`, softmax-normalized), aggregated by weighted sum and
//!    passed through a shared affine map plus activation.
//! 2. **Hyperplane translation** — every edge is scored by projecting head
//!    and tail onto the relation's hyperplane and measuring how well the
//!    relation vector translates one onto the other:
//!    `f = ‖proj(h) + r − proj(t)‖`, lower meaning more plausible.
//! 3. **Intent-prior relation** — for user→item edges the translation vector
//!    is not a free parameter: it is assembled from the two endpoints'
//!    intent neighborhoods, softmax-weighted by pairwise intent similarity,
//!    so users and items that share intents need almost no translation.
//!    When either endpoint has no intents, a trained generic row stands in.
//!
//! Training minimizes a log-sigmoid ranking loss between each edge and a
//! corrupted counterpart (random tail and relation), with weight decay and
//! soft norm penalties. Gradients are fully analytic and verified against
//! central finite differences in the test suite.

mod backward;
mod forward;
mod index;
mod params;
mod train;

pub use forward::{
    cosine, energy, forward_score, full_conv, intent_relation, kg_conv, kg_conv_traced, pair_loss,
    plausibility, ranking_loss, transh_project, ConvNeighborhood, ConvTrace, ForwardContext,
};
pub use backward::{batch_loss, gradients, Gradients, TriplePair};
pub use index::ModelIndex;
pub use params::{
    load_checkpoint, save_checkpoint, Activation, ModelParameters, ModelVariant, RelationSlot,
    TrainConfig,
};
pub use train::{train, train_with_features, write_loss_trace, EpochLoss, TrainOutcome};

/// Errors raised by model construction, training, or checkpoint I/O.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projection vector has zero norm")]
    ZeroProjectionVector,
    #[error("both intent sets must be non-empty")]
    EmptyIntentSet,
    #[error("graph has no user-item interaction edges")]
    NoInteractions,
    #[error("node {0} is not part of the model index")]
    UnknownNode(crate::graph::NodeId),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    DivergenceDetected {
        epoch: usize,
        /// Parameters as of the last epoch that finished with finite loss.
        last_good: Box<ModelParameters>,
        trace: Vec<EpochLoss>,
    },
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Dot product of equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ‖v‖₂.
pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Numerically stable softmax.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Numerically stable softplus: ln(1 + eˣ).
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
