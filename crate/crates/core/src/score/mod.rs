//! Inference-time hybrid scoring and top-N ranking.
//!
//! A trained model rates a `(user, item)` pair with two complementary
//! signals: the cosine between their convolved embeddings, and the best
//! cosine achievable between any of the user's intents and any of the
//! item's — halved when the two intent sets share no canonical label, so a
//! lexical mismatch is punished but a strong semantic match can still
//! surface. The final score mixes the two linearly, and [`Scorer::rank`]
//! orders an upstream retriever's candidates by it.

use std::collections::HashSet;

use crate::graph::{IntentGraph, NodeId};
use crate::label;
use crate::model::{
    cosine, full_conv, ModelError, ModelIndex, ModelParameters, TrainConfig,
};

#[cfg(test)]
mod tests;

/// Mixing weight for the embedding cosine in the final score.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Multiplier applied to the intent score when the label sets are disjoint.
pub const DEFAULT_OVERLAP_PENALTY: f64 = 0.5;

/// Errors raised while scoring or ranking.
#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    /// Cosine similarity is undefined for a zero-length embedding.
    #[error("cannot take the cosine of a zero vector")]
    ZeroVector,
    /// The ranking request violates its own contract.
    #[error("invalid ranking request: {0}")]
    InvalidRequest(String),
    /// Failure bubbled up from the model layer.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Scoring knobs, both defaulting to the values that won validation sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    /// Weight of the embedding cosine in the final mixture.
    pub lambda: f64,
    /// Factor applied to the intent score when no canonical label is shared.
    pub overlap_penalty: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            lambda: DEFAULT_LAMBDA,
            overlap_penalty: DEFAULT_OVERLAP_PENALTY,
        }
    }
}

/// One intent attached to a user or item: its canonical label (for the
/// overlap test) and its embedding (for the similarity max).
#[derive(Debug, Clone, PartialEq)]
pub struct IntentFeature {
    pub label: String,
    pub embedding: Vec<f64>,
}

/// Every component of a final score, kept separate for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBreakdown {
    /// Cosine between the convolved user and item embeddings (z).
    pub embed_score: f64,
    /// Best intent-pair cosine, penalized on label disjointness (y).
    pub intent_score: f64,
    /// Whether the disjointness penalty multiplied into `intent_score`.
    pub penalty_applied: bool,
    /// The mixture y + λ·z that ranking sorts by.
    pub final_score: f64,
}

/// A re-ranking job: order `candidates` for `user`, keep the best `cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRequest {
    pub user: NodeId,
    pub candidates: Vec<NodeId>,
    pub cutoff: usize,
}

impl RankingRequest {
    fn validate(&self) -> Result<(), ScoreError> {
        if self.candidates.is_empty() {
            return Err(ScoreError::InvalidRequest(
                "candidate list is empty".into(),
            ));
        }
        if self.cutoff == 0 {
            return Err(ScoreError::InvalidRequest("cutoff must be at least 1".into()));
        }
        Ok(())
    }
}

/// One ranked candidate. `breakdown` is `None` when scoring the candidate
/// failed; such entries sort after every scored one.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub item: NodeId,
    pub breakdown: Option<ScoreBreakdown>,
}

/// Cosine between two user/item embeddings, rejecting zero vectors and
/// clamping rounding spill so the result stays within [-1, 1].
pub fn embed_score(e_u: &[f64], e_i: &[f64]) -> Result<f64, ScoreError> {
    if e_u.iter().all(|x| *x == 0.0) || e_i.iter().all(|x| *x == 0.0) {
        return Err(ScoreError::ZeroVector);
    }
    Ok(cosine(e_u, e_i).clamp(-1.0, 1.0))
}

/// Best intent-pair cosine between the two sets, multiplied by
/// `overlap_penalty` when they share no canonical label. Either side empty
/// scores 0 with the penalty flag raised.
pub fn intent_score(
    omega_u: &[IntentFeature],
    omega_i: &[IntentFeature],
    overlap_penalty: f64,
) -> (f64, bool) {
    if omega_u.is_empty() || omega_i.is_empty() {
        return (0.0, true);
    }
    let user_labels: HashSet<&str> = omega_u.iter().map(|f| f.label.as_str()).collect();
    let disjoint = !omega_i.iter().any(|f| user_labels.contains(f.label.as_str()));
    let mut best = f64::NEG_INFINITY;
    for fu in omega_u {
        for fi in omega_i {
            best = best.max(cosine(&fu.embedding, &fi.embedding));
        }
    }
    let score = if disjoint { best * overlap_penalty } else { best };
    (score, disjoint)
}

/// Frozen scoring context: the convolved graph plus everything needed to
/// look intents up by node. Pure and shareable once built.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    graph: &'a IntentGraph,
    params: &'a ModelParameters,
    index: ModelIndex,
    convolved: Vec<Vec<f64>>,
    config: ScoreConfig,
}

impl<'a> Scorer<'a> {
    /// Convolve the whole graph once and freeze the scoring context.
    pub fn new(
        graph: &'a IntentGraph,
        params: &'a ModelParameters,
        train_config: &TrainConfig,
        config: ScoreConfig,
    ) -> Result<Self, ScoreError> {
        let index = ModelIndex::build(graph);
        if params.node_count() != index.node_count() {
            return Err(ScoreError::Model(ModelError::DimensionMismatch {
                expected: index.node_count(),
                got: params.node_count(),
            }));
        }
        let convolved = full_conv(
            &index,
            params,
            train_config.effective_conv_layers(),
            train_config.activation,
        )?;
        Ok(Scorer {
            graph,
            params,
            index,
            convolved,
            config,
        })
    }

    /// The dense index this scorer resolves node ids through.
    pub fn index(&self) -> &ModelIndex {
        &self.index
    }

    /// Convolved embedding of a known node.
    pub fn embedding(&self, id: NodeId) -> Result<&[f64], ScoreError> {
        let p = self.index.require(id)?;
        Ok(&self.convolved[p])
    }

    /// Intent neighbors of the node at `position`, with canonical labels and
    /// convolved embeddings.
    fn intent_features(&self, position: usize) -> Vec<IntentFeature> {
        self.index.intent_neighbors[position]
            .iter()
            .map(|q| {
                let id = self.index.node_ids[*q];
                let node = self
                    .graph
                    .node(id)
                    .expect("index position maps to a graph node");
                IntentFeature {
                    label: label::canonical(&node.label),
                    embedding: self.convolved[*q].clone(),
                }
            })
            .collect()
    }

    /// Full hybrid score of one `(user, item)` pair.
    pub fn hybrid_score(&self, user: NodeId, item: NodeId) -> Result<ScoreBreakdown, ScoreError> {
        let u = self.index.require(user)?;
        let i = self.index.require(item)?;
        let z = embed_score(&self.convolved[u], &self.convolved[i])?;
        let (y, penalty_applied) = intent_score(
            &self.intent_features(u),
            &self.intent_features(i),
            self.config.overlap_penalty,
        );
        Ok(ScoreBreakdown {
            embed_score: z,
            intent_score: y,
            penalty_applied,
            final_score: y + self.config.lambda * z,
        })
    }

    /// Order the request's candidates by descending final score (ties by
    /// ascending item id), flag candidates that fail to score and sink them
    /// below every scored one, and keep the best `cutoff`.
    pub fn rank(&self, request: &RankingRequest) -> Result<Vec<RankedCandidate>, ScoreError> {
        request.validate()?;
        let mut ranked: Vec<RankedCandidate> = request
            .candidates
            .iter()
            .map(|item| RankedCandidate {
                item: *item,
                breakdown: self.hybrid_score(request.user, *item).ok(),
            })
            .collect();
        ranked.sort_by(|a, b| match (&a.breakdown, &b.breakdown) {
            (Some(x), Some(y)) => y
                .final_score
                .total_cmp(&x.final_score)
                .then(a.item.cmp(&b.item)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.item.cmp(&b.item),
        });
        ranked.truncate(request.cutoff.min(request.candidates.len()));
        Ok(ranked)
    }

    /// Trained parameters backing this scorer.
    pub fn params(&self) -> &ModelParameters {
        self.params
    }
}
