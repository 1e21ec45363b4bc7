//! Training: initialization, negative sampling, the Adam optimizer, and the
//! epoch loop with a divergence guard.
//!
//! All randomness flows through one seeded ChaCha8 stream in a fixed draw
//! order (initialization, then per-epoch shuffles and negative draws), so a
//! fixed seed reproduces the final parameters bit for bit.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{IntentGraph, NodeId};

use super::backward::{gradients, Gradients, TriplePair};
use super::index::ModelIndex;
use super::params::{ModelParameters, RelationSlot, TrainConfig};
use super::{norm, ModelError};

/// Mean training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
}

/// Trained parameters plus the loss trace and the node-position mapping the
/// parameters are expressed in.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub trace: Vec<EpochLoss>,
    pub index: ModelIndex,
}

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

/// Standard normal draw via Box–Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gaussian row rescaled to the given norm.
fn random_row(rng: &mut ChaCha8Rng, dim: usize, target_norm: f64) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = norm(&row);
        if n > 0.0 {
            for x in &mut row {
                *x *= target_norm / n;
            }
            return row;
        }
    }
}

/// Entity rows start at norm 0.5: inside the unit ball (so the norm penalty
/// is inactive at the start) but far from zero.
const INIT_ENTITY_NORM: f64 = 0.5;

fn init_parameters(
    index: &ModelIndex,
    config: &TrainConfig,
    features: Option<&HashMap<NodeId, Vec<f64>>>,
    rng: &mut ChaCha8Rng,
) -> ModelParameters {
    let d = config.dim;
    let n = index.node_count();

    // Feature-seeded rows are projected to d dimensions through a fixed
    // random matrix, then rescaled like the random rows so both paths start
    // at the same magnitude.
    let projection: Option<Vec<Vec<f64>>> = features.and_then(|map| {
        let feat_dim = map.values().next()?.len();
        Some(
            (0..d)
                .map(|_| (0..feat_dim).map(|_| gaussian(rng) / (feat_dim as f64).sqrt()).collect())
                .collect(),
        )
    });

    let mut entities = Vec::with_capacity(n);
    for id in &index.node_ids {
        let feature_row = features
            .and_then(|map| map.get(id))
            .zip(projection.as_ref())
            .and_then(|(feat, proj)| {
                let mut row: Vec<f64> = proj
                    .iter()
                    .map(|p_row| {
                        p_row
                            .iter()
                            .zip(feat)
                            .map(|(p, f)| p * f)
                            .sum::<f64>()
                    })
                    .collect();
                let rn = norm(&row);
                if rn > 0.0 {
                    for x in &mut row {
                        *x *= INIT_ENTITY_NORM / rn;
                    }
                    Some(row)
                } else {
                    None
                }
            });
        entities.push(feature_row.unwrap_or_else(|| random_row(rng, d, INIT_ENTITY_NORM)));
    }

    let relations = (0..RelationSlot::COUNT)
        .map(|_| random_row(rng, d, 1.0))
        .collect();
    let hyperplanes = (0..RelationSlot::COUNT)
        .map(|_| random_row(rng, d, 1.0))
        .collect();
    let conv_weight = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let noise = rng.gen_range(-0.01..0.01);
                    if i == j {
                        1.0 + noise
                    } else {
                        noise
                    }
                })
                .collect()
        })
        .collect();

    ModelParameters {
        dim: d,
        entities,
        relations,
        hyperplanes,
        conv_weight,
        conv_bias: vec![0.0; d],
    }
}

// ---------------------------------------------------------------------------
// negative sampling
// ---------------------------------------------------------------------------

/// Corrupt a positive by drawing a relation slot valid for the head's kind
/// and a tail of that slot's required kind, rejecting draws that collide
/// with a true edge (by relation kind). After 20 rejections the last draw is
/// kept.
fn sample_negative(
    index: &ModelIndex,
    rng: &mut ChaCha8Rng,
    head: usize,
) -> (usize, RelationSlot) {
    let slots: Vec<RelationSlot> = RelationSlot::valid_for_head(index.kinds[head])
        .iter()
        .copied()
        .filter(|s| !index.candidates(s.tail_kind()).is_empty())
        .collect();
    debug_assert!(
        !slots.is_empty(),
        "a node heading an edge always has at least one slot with candidate tails"
    );
    let mut last = (usize::MAX, RelationSlot::Consumes);
    for _ in 0..20 {
        let slot = slots[rng.gen_range(0..slots.len())];
        let candidates = index.candidates(slot.tail_kind());
        let tail = candidates[rng.gen_range(0..candidates.len())];
        last = (tail, slot);
        if !index.has_edge(head, tail, slot.relation()) {
            return last;
        }
    }
    last
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl AdamState {
    fn new(params: &ModelParameters) -> Self {
        AdamState {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
        }
    }

    fn apply(&mut self, params: &mut ModelParameters, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let update_rows = |p: &mut Vec<Vec<f64>>,
                           m: &mut Vec<Vec<f64>>,
                           v: &mut Vec<Vec<f64>>,
                           g: &Vec<Vec<f64>>| {
            for ((p_row, m_row), (v_row, g_row)) in
                p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut().zip(g))
            {
                update_row(p_row, m_row, v_row, g_row, lr, c1, c2);
            }
        };
        update_rows(
            &mut params.entities,
            &mut self.m.entities,
            &mut self.v.entities,
            &grads.entities,
        );
        update_rows(
            &mut params.relations,
            &mut self.m.relations,
            &mut self.v.relations,
            &grads.relations,
        );
        update_rows(
            &mut params.hyperplanes,
            &mut self.m.hyperplanes,
            &mut self.v.hyperplanes,
            &grads.hyperplanes,
        );
        update_rows(
            &mut params.conv_weight,
            &mut self.m.conv_weight,
            &mut self.v.conv_weight,
            &grads.conv_weight,
        );
        update_row(
            &mut params.conv_bias,
            &mut self.m.conv_bias,
            &mut self.v.conv_bias,
            &grads.conv_bias,
            lr,
            c1,
            c2,
        );
    }
}

fn update_row(p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, c1: f64, c2: f64) {
    for k in 0..p.len() {
        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Hard-renormalize hyperplane rows to unit length after a step.
fn renormalize_hyperplanes(params: &mut ModelParameters) {
    for row in &mut params.hyperplanes {
        let n = norm(row);
        // An overflowed norm would turn the row into zeros; leave it for the
        // finiteness check to flag instead.
        if n > 0.0 && n.is_finite() {
            for x in row {
                *x /= n;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// the loop
// ---------------------------------------------------------------------------

/// Train on the graph with randomly initialized entity rows.
pub fn train(graph: &IntentGraph, config: &TrainConfig) -> Result<TrainOutcome, ModelError> {
    train_with_features(graph, config, None)
}

/// Train with entity rows seeded from text-encoder vectors where available
/// (nodes without a feature fall back to random initialization).
pub fn train_with_features(
    graph: &IntentGraph,
    config: &TrainConfig,
    features: Option<&HashMap<NodeId, Vec<f64>>>,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    let index = ModelIndex::build(graph);
    if index.interaction_count() == 0 {
        return Err(ModelError::NoInteractions);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_parameters(&index, config, features, &mut rng);
    let mut adam = AdamState::new(&params);
    let mut trace: Vec<EpochLoss> = Vec::with_capacity(config.epochs);
    let mut last_good = params.clone();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..index.edges.len()).collect();
        order.shuffle(&mut rng);
        let mut weighted_loss = 0.0;
        let mut pair_count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut pairs = Vec::with_capacity(chunk.len() * config.negatives_per_positive);
            for &edge_idx in chunk {
                let (head, tail, slot) = index.edges[edge_idx];
                for _ in 0..config.negatives_per_positive {
                    let (neg_tail, neg_slot) = sample_negative(&index, &mut rng, head);
                    pairs.push(TriplePair {
                        head,
                        pos_tail: tail,
                        pos_slot: slot,
                        neg_tail,
                        neg_slot,
                    });
                }
            }
            let diverged = |trace: Vec<EpochLoss>, last_good: ModelParameters| {
                ModelError::DivergenceDetected {
                    epoch,
                    last_good: Box::new(last_good),
                    trace,
                }
            };
            let (loss, grads) = match gradients(&index, &params, config, &pairs) {
                Ok(step) => step,
                // A vanished projection vector mid-run is a numeric collapse,
                // not a caller mistake: report it as divergence too.
                Err(ModelError::NonFinite(_)) | Err(ModelError::ZeroProjectionVector) => {
                    return Err(diverged(trace, last_good))
                }
                Err(other) => return Err(other),
            };
            adam.apply(&mut params, &grads, config.learning_rate);
            renormalize_hyperplanes(&mut params);
            if !params.all_finite() {
                return Err(diverged(trace, last_good));
            }
            weighted_loss += loss * pairs.len() as f64;
            pair_count += pairs.len();
        }
        let epoch_loss = if pair_count == 0 {
            0.0
        } else {
            weighted_loss / pair_count as f64
        };
        trace.push(EpochLoss {
            epoch,
            loss: epoch_loss,
        });
        last_good = params.clone();
    }

    Ok(TrainOutcome {
        params,
        trace,
        index,
    })
}

/// Emit the loss trace as `epoch,loss` lines.
pub fn write_loss_trace(path: &Path, trace: &[EpochLoss]) -> Result<(), ModelError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for point in trace {
        writeln!(out, "{},{}", point.epoch, point.loss)?;
    }
    Ok(())
}
