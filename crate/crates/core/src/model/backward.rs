//! Batch loss and analytic gradients.
//!
//! `batch_loss` and `gradients` compute the same scalar objective — the mean
//! pairwise ranking loss over a batch plus weight decay and norm penalties —
//! through two independent code paths, so the test suite can cross-check
//! them against each other and against finite differences.

use super::forward::{cosine, full_conv_traced, ForwardContext};
use super::index::ModelIndex;
use super::params::{ModelParameters, ModelVariant, RelationSlot, TrainConfig};
use super::{dot, norm, sigmoid, softmax, softplus, ModelError};

/// One training example: a positive triple and its corrupted counterpart.
/// All node references are model-index positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriplePair {
    pub head: usize,
    pub pos_tail: usize,
    pub pos_slot: RelationSlot,
    pub neg_tail: usize,
    pub neg_slot: RelationSlot,
}

/// Gradient record with the same shape as [`ModelParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entities: Vec<Vec<f64>>,
    pub relations: Vec<Vec<f64>>,
    pub hyperplanes: Vec<Vec<f64>>,
    pub conv_weight: Vec<Vec<f64>>,
    pub conv_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParameters) -> Self {
        let zero_rows = |rows: usize, cols: usize| vec![vec![0.0; cols]; rows];
        Gradients {
            entities: zero_rows(params.entities.len(), params.dim),
            relations: zero_rows(params.relations.len(), params.dim),
            hyperplanes: zero_rows(params.hyperplanes.len(), params.dim),
            conv_weight: zero_rows(params.dim, params.dim),
            conv_bias: vec![0.0; params.dim],
        }
    }

    pub fn all_finite(&self) -> bool {
        let rows = self
            .entities
            .iter()
            .chain(&self.relations)
            .chain(&self.hyperplanes)
            .chain(&self.conv_weight);
        rows.flatten()
            .chain(&self.conv_bias)
            .all(|x| x.is_finite())
    }
}

// ---------------------------------------------------------------------------
// objective
// ---------------------------------------------------------------------------

/// Weight decay plus soft norm penalties over the parameter tensors.
fn regularization(params: &ModelParameters, config: &TrainConfig) -> f64 {
    let sq = |rows: &[Vec<f64>]| -> f64 { rows.iter().flatten().map(|x| x * x).sum() };
    let mut total = config.weight_decay
        * (sq(&params.entities)
            + sq(&params.relations)
            + sq(&params.hyperplanes)
            + sq(&params.conv_weight)
            + params.conv_bias.iter().map(|x| x * x).sum::<f64>());
    if config.entity_norm_penalty > 0.0 {
        let over: f64 = params
            .entities
            .iter()
            .map(|e| (dot(e, e) - 1.0).max(0.0))
            .sum();
        total += config.entity_norm_penalty * over;
    }
    if config.hyperplane_norm_penalty > 0.0 {
        let drift: f64 = params
            .hyperplanes
            .iter()
            .map(|w| {
                let d = dot(w, w) - 1.0;
                d * d
            })
            .sum();
        total += config.hyperplane_norm_penalty * drift;
    }
    total
}

/// Mean per-pair ranking loss over the batch plus regularization.
pub fn batch_loss(
    index: &ModelIndex,
    params: &ModelParameters,
    config: &TrainConfig,
    pairs: &[TriplePair],
) -> Result<f64, ModelError> {
    let ctx = ForwardContext::new(index, params, config)?;
    let mut sum = 0.0;
    for pair in pairs {
        let pos = ctx.triple_plausibility(
            index,
            params,
            config.variant,
            pair.head,
            pair.pos_tail,
            pair.pos_slot,
        )?;
        let neg = ctx.triple_plausibility(
            index,
            params,
            config.variant,
            pair.head,
            pair.neg_tail,
            pair.neg_slot,
        )?;
        sum += softplus(neg - pos);
    }
    let mean = if pairs.is_empty() {
        0.0
    } else {
        sum / pairs.len() as f64
    };
    let loss = mean + regularization(params, config);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite("loss"));
    }
    Ok(loss)
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

/// Stashed forward intermediates of a single triple.
enum TripleForward {
    /// Dot-product plausibility of the two convolved endpoints.
    Dot { plaus: f64 },
    /// Translation energy with everything the backward pass re-uses.
    Translation {
        plaus: f64,
        /// Energy value f = ‖gap‖.
        f: f64,
        /// proj(h) + r − proj(t).
        gap: Vec<f64>,
        /// Normalized hyperplane vector.
        unit_w: Vec<f64>,
        /// Raw hyperplane norm (‖w‖ before normalization).
        w_norm: f64,
        /// Softmax weights over intent pairs when the translation was
        /// intent-derived; `None` means the generic row was read.
        intent_weights: Option<Vec<f64>>,
    },
}

impl TripleForward {
    fn plaus(&self) -> f64 {
        match self {
            TripleForward::Dot { plaus } => *plaus,
            TripleForward::Translation { plaus, .. } => *plaus,
        }
    }
}

/// Forward pass of one triple keeping the intermediates needed for backward.
/// Mirrors `ForwardContext::triple_plausibility` exactly.
fn triple_forward(
    index: &ModelIndex,
    params: &ModelParameters,
    variant: ModelVariant,
    x: &[Vec<f64>],
    head: usize,
    tail: usize,
    slot: RelationSlot,
) -> Result<TripleForward, ModelError> {
    if variant == ModelVariant::VanillaGnn {
        return Ok(TripleForward::Dot {
            plaus: dot(&x[head], &x[tail]),
        });
    }
    let mut intent_weights = None;
    let r: Vec<f64> = if slot == RelationSlot::Consumes
        && variant.uses_intent_relation()
        && !index.intent_neighbors[head].is_empty()
        && !index.intent_neighbors[tail].is_empty()
    {
        let us = &index.intent_neighbors[head];
        let is = &index.intent_neighbors[tail];
        let mut sims = Vec::with_capacity(us.len() * is.len());
        for p in us {
            for q in is {
                sims.push(cosine(&x[*p], &x[*q]));
            }
        }
        let weights = softmax(&sims);
        let mut r = vec![0.0; params.dim];
        let mut w = weights.iter();
        for p in us {
            for q in is {
                let weight = *w.next().expect("one weight per pair");
                for ((acc, i), u) in r.iter_mut().zip(&x[*q]).zip(&x[*p]) {
                    *acc += weight * (i - u);
                }
            }
        }
        intent_weights = Some(weights);
        r
    } else {
        params.relations[slot.index()].clone()
    };

    let w = &params.hyperplanes[slot.index()];
    let w_norm = norm(w);
    if w_norm == 0.0 {
        return Err(ModelError::ZeroProjectionVector);
    }
    let unit_w: Vec<f64> = w.iter().map(|v| v / w_norm).collect();
    let project = |e: &[f64]| -> Vec<f64> {
        let along = dot(&unit_w, e);
        e.iter().zip(&unit_w).map(|(v, u)| v - along * u).collect()
    };
    let hp = project(&x[head]);
    let tp = project(&x[tail]);
    let gap: Vec<f64> = hp
        .iter()
        .zip(&tp)
        .zip(&r)
        .map(|((h, t), r)| h + r - t)
        .collect();
    let f = norm(&gap);
    Ok(TripleForward::Translation {
        plaus: -f,
        f,
        gap,
        unit_w,
        w_norm,
        intent_weights,
    })
}

/// Backward through the hyperplane projection `p = e − (ŵ·e)ŵ`, given the
/// gradient w.r.t. `p`. Adds the entity part into `de` and returns the
/// gradient w.r.t. the *normalized* hyperplane vector.
fn projection_backward(e: &[f64], unit_w: &[f64], dp: &[f64], de: &mut [f64]) -> Vec<f64> {
    let w_dot_dp = dot(unit_w, dp);
    for ((acc, d), u) in de.iter_mut().zip(dp).zip(unit_w) {
        *acc += d - w_dot_dp * u;
    }
    let w_dot_e = dot(unit_w, e);
    dp.iter()
        .zip(e)
        .map(|(d, ev)| -w_dot_dp * ev - w_dot_e * d)
        .collect()
}

/// Backward of one triple's plausibility into the convolved-embedding delta
/// matrix and the relation/hyperplane gradients.
#[allow(clippy::too_many_arguments)]
fn triple_backward(
    index: &ModelIndex,
    params: &ModelParameters,
    x: &[Vec<f64>],
    head: usize,
    tail: usize,
    slot: RelationSlot,
    fwd: &TripleForward,
    d_plaus: f64,
    dx: &mut [Vec<f64>],
    grads: &mut Gradients,
) {
    match fwd {
        TripleForward::Dot { .. } => {
            for k in 0..params.dim {
                dx[head][k] += d_plaus * x[tail][k];
                dx[tail][k] += d_plaus * x[head][k];
            }
        }
        TripleForward::Translation {
            f,
            gap,
            unit_w,
            w_norm,
            intent_weights,
            ..
        } => {
            // plaus = −f, and f = ‖gap‖ has zero subgradient at the kink.
            if *f == 0.0 {
                return;
            }
            let df = -d_plaus;
            let dgap: Vec<f64> = gap.iter().map(|g| df * g / f).collect();

            // gap = proj(h) + r − proj(t)
            let dr = &dgap;
            let neg_dgap: Vec<f64> = dgap.iter().map(|g| -g).collect();
            let mut dhead = vec![0.0; params.dim];
            let mut dtail = vec![0.0; params.dim];
            let dw_h = projection_backward(&x[head], unit_w, &dgap, &mut dhead);
            let dw_t = projection_backward(&x[tail], unit_w, &neg_dgap, &mut dtail);
            for k in 0..params.dim {
                dx[head][k] += dhead[k];
                dx[tail][k] += dtail[k];
            }
            // Normalization backward: ŵ = w/‖w‖.
            let d_unit: Vec<f64> = dw_h.iter().zip(&dw_t).map(|(a, b)| a + b).collect();
            let along = dot(unit_w, &d_unit);
            for (k, g) in grads.hyperplanes[slot.index()].iter_mut().enumerate() {
                *g += (d_unit[k] - along * unit_w[k]) / w_norm;
            }

            match intent_weights {
                None => {
                    for (g, d) in grads.relations[slot.index()].iter_mut().zip(dr) {
                        *g += d;
                    }
                }
                Some(weights) => {
                    intent_relation_backward(index, x, head, tail, weights, dr, dx);
                }
            }
        }
    }
}

/// Backward of `r = softmax(sims)ᵀ D` with `sims` the flattened pairwise
/// cosines and `D` rows `z_i[q] − z_u[p]`, into the delta matrix.
fn intent_relation_backward(
    index: &ModelIndex,
    x: &[Vec<f64>],
    head: usize,
    tail: usize,
    weights: &[f64],
    dr: &[f64],
    dx: &mut [Vec<f64>],
) {
    let us = &index.intent_neighbors[head];
    let is = &index.intent_neighbors[tail];

    // Direct path through D plus the weight deltas.
    let mut d_weights = Vec::with_capacity(weights.len());
    {
        let mut w = weights.iter();
        for p in us {
            for q in is {
                let weight = *w.next().expect("one weight per pair");
                let diff_dot: f64 = dr
                    .iter()
                    .zip(&x[*q])
                    .zip(&x[*p])
                    .map(|((d, i), u)| d * (i - u))
                    .sum();
                d_weights.push(diff_dot);
                for k in 0..dr.len() {
                    dx[*q][k] += weight * dr[k];
                    dx[*p][k] -= weight * dr[k];
                }
            }
        }
    }

    // Softmax backward into the similarity scores.
    let inner: f64 = weights.iter().zip(&d_weights).map(|(a, b)| a * b).sum();
    let d_sims: Vec<f64> = weights
        .iter()
        .zip(&d_weights)
        .map(|(a, b)| a * (b - inner))
        .collect();

    // Cosine backward per pair; zero-norm cosines contribute no gradient.
    let mut idx = 0;
    for p in us {
        for q in is {
            let dc = d_sims[idx];
            idx += 1;
            if dc == 0.0 {
                continue;
            }
            let a = &x[*p];
            let b = &x[*q];
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            let c = dot(a, b) / (na * nb);
            for k in 0..a.len() {
                dx[*p][k] += dc * (b[k] / (na * nb) - c * a[k] / (na * na));
                dx[*q][k] += dc * (a[k] / (na * nb) - c * b[k] / (nb * nb));
            }
        }
    }
}

/// Backward through the convolution stack: consumes the delta of the final
/// embeddings and accumulates into entity, relation, and affine gradients.
fn conv_backward(
    index: &ModelIndex,
    params: &ModelParameters,
    config: &TrainConfig,
    trace: &super::forward::FullConvTrace,
    mut dx: Vec<Vec<f64>>,
    grads: &mut Gradients,
) {
    let d = params.dim;
    for layer in trace.layers.iter().rev() {
        let input = &layer.input;
        let mut d_input = vec![vec![0.0; d]; index.node_count()];
        for p in 0..index.node_count() {
            if dx[p].iter().all(|v| *v == 0.0) {
                continue;
            }
            let node = &layer.nodes[p];
            let d_pre: Vec<f64> = dx[p]
                .iter()
                .zip(&node.pre_activation)
                .map(|(g, pre)| g * config.activation.derivative(*pre))
                .collect();
            for (acc, g) in grads.conv_bias.iter_mut().zip(&d_pre) {
                *acc += g;
            }
            for (row, g) in grads.conv_weight.iter_mut().zip(&d_pre) {
                for (cell, v) in row.iter_mut().zip(&node.input_sum) {
                    *cell += g * v;
                }
            }
            // δ(v + a) = Wᵀ δpre
            let mut d_insum = vec![0.0; d];
            for (w_row, g) in params.conv_weight.iter().zip(&d_pre) {
                for (acc, w) in d_insum.iter_mut().zip(w_row) {
                    *acc += g * w;
                }
            }
            for (acc, g) in d_input[p].iter_mut().zip(&d_insum) {
                *acc += g;
            }

            let nbrs = &index.adjacency[p];
            if nbrs.is_empty() {
                continue;
            }
            // Aggregate path: a = Σ α_j e_j with α = softmax(r_j · e_j).
            let d_alphas: Vec<f64> = nbrs
                .iter()
                .map(|(q, _)| dot(&d_insum, &input[*q]))
                .collect();
            for ((q, _), alpha) in nbrs.iter().zip(&node.alphas) {
                for (acc, g) in d_input[*q].iter_mut().zip(&d_insum) {
                    *acc += alpha * g;
                }
            }
            let inner: f64 = node
                .alphas
                .iter()
                .zip(&d_alphas)
                .map(|(a, b)| a * b)
                .sum();
            for (j, (q, slot)) in nbrs.iter().enumerate() {
                let d_score = node.alphas[j] * (d_alphas[j] - inner);
                if d_score == 0.0 {
                    continue;
                }
                for (acc, e) in grads.relations[slot.index()].iter_mut().zip(&input[*q]) {
                    *acc += d_score * e;
                }
                let r = &params.relations[slot.index()];
                for (acc, rv) in d_input[*q].iter_mut().zip(r) {
                    *acc += d_score * rv;
                }
            }
        }
        dx = d_input;
    }
    for (row, d_row) in grads.entities.iter_mut().zip(&dx) {
        for (acc, g) in row.iter_mut().zip(d_row) {
            *acc += g;
        }
    }
}

fn add_regularization_gradients(
    params: &ModelParameters,
    config: &TrainConfig,
    grads: &mut Gradients,
) {
    let wd = config.weight_decay;
    if wd > 0.0 {
        let pairs: [(&[Vec<f64>], &mut Vec<Vec<f64>>); 4] = [
            (&params.entities, &mut grads.entities),
            (&params.relations, &mut grads.relations),
            (&params.hyperplanes, &mut grads.hyperplanes),
            (&params.conv_weight, &mut grads.conv_weight),
        ];
        for (values, grad) in pairs {
            for (v_row, g_row) in values.iter().zip(grad.iter_mut()) {
                for (v, g) in v_row.iter().zip(g_row.iter_mut()) {
                    *g += 2.0 * wd * v;
                }
            }
        }
        for (v, g) in params.conv_bias.iter().zip(grads.conv_bias.iter_mut()) {
            *g += 2.0 * wd * v;
        }
    }
    if config.entity_norm_penalty > 0.0 {
        for (e, g_row) in params.entities.iter().zip(grads.entities.iter_mut()) {
            if dot(e, e) > 1.0 {
                for (v, g) in e.iter().zip(g_row.iter_mut()) {
                    *g += 2.0 * config.entity_norm_penalty * v;
                }
            }
        }
    }
    if config.hyperplane_norm_penalty > 0.0 {
        for (w, g_row) in params.hyperplanes.iter().zip(grads.hyperplanes.iter_mut()) {
            let drift = dot(w, w) - 1.0;
            for (v, g) in w.iter().zip(g_row.iter_mut()) {
                *g += 4.0 * config.hyperplane_norm_penalty * drift * v;
            }
        }
    }
}

/// Loss and analytic gradients of [`batch_loss`] over the same batch.
pub fn gradients(
    index: &ModelIndex,
    params: &ModelParameters,
    config: &TrainConfig,
    pairs: &[TriplePair],
) -> Result<(f64, Gradients), ModelError> {
    let layers = config.effective_conv_layers();
    let trace = full_conv_traced(index, params, layers, config.activation)?;
    let x = &trace.output;
    let mut grads = Gradients::zeros_like(params);
    let mut dx = vec![vec![0.0; params.dim]; index.node_count()];

    let mut pair_sum = 0.0;
    let scale = if pairs.is_empty() {
        0.0
    } else {
        1.0 / pairs.len() as f64
    };
    for pair in pairs {
        let pos = triple_forward(
            index,
            params,
            config.variant,
            x,
            pair.head,
            pair.pos_tail,
            pair.pos_slot,
        )?;
        let neg = triple_forward(
            index,
            params,
            config.variant,
            x,
            pair.head,
            pair.neg_tail,
            pair.neg_slot,
        )?;
        let q = neg.plaus() - pos.plaus();
        pair_sum += softplus(q);
        let d_q = sigmoid(q) * scale;
        triple_backward(
            index,
            params,
            x,
            pair.head,
            pair.pos_tail,
            pair.pos_slot,
            &pos,
            -d_q,
            &mut dx,
            &mut grads,
        );
        triple_backward(
            index,
            params,
            x,
            pair.head,
            pair.neg_tail,
            pair.neg_slot,
            &neg,
            d_q,
            &mut dx,
            &mut grads,
        );
    }

    conv_backward(index, params, config, &trace, dx, &mut grads);
    add_regularization_gradients(params, config, &mut grads);

    let mean = if pairs.is_empty() {
        0.0
    } else {
        pair_sum / pairs.len() as f64
    };
    let loss = mean + regularization(params, config);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite("loss"));
    }
    if !grads.all_finite() {
        return Err(ModelError::NonFinite("gradient"));
    }
    Ok((loss, grads))
}
