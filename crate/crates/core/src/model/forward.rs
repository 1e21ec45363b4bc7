//! Forward operations: convolution, hyperplane translation, the
//! intent-derived interaction relation, and the pairwise ranking loss.

use rayon::prelude::*;

use crate::graph::NodeId;

use super::index::ModelIndex;
use super::params::{Activation, ModelParameters, ModelVariant, RelationSlot, TrainConfig};
use super::{dot, norm, sigmoid, softmax, softplus, ModelError};

/// Inputs to one convolution step: the center vector plus parallel slices of
/// neighbor entity and relation vectors.
#[derive(Debug, Clone)]
pub struct ConvNeighborhood<'a> {
    pub center: &'a [f64],
    pub entities: Vec<&'a [f64]>,
    pub relations: Vec<&'a [f64]>,
}

/// Intermediate values of one convolution step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvTrace {
    /// Softmax attention weights, one per neighbor.
    pub alphas: Vec<f64>,
    /// Center plus attention-weighted neighbor aggregate (the affine input).
    pub input_sum: Vec<f64>,
    /// Pre-activation affine output.
    pub pre_activation: Vec<f64>,
    /// Final activated output.
    pub output: Vec<f64>,
}

fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, got })
    }
}

/// One convolution step with full trace.
///
/// Per-neighbor attention `s_j = r_j · e_j` is softmax-normalized into
/// weights α, the neighbors are aggregated as `a = Σ_j α_j e_j` (zero when
/// there are none), and the result is `act(W(v + a) + b)`.
pub fn kg_conv_traced(
    nbhd: &ConvNeighborhood<'_>,
    weight: &[Vec<f64>],
    bias: &[f64],
    activation: Activation,
) -> Result<ConvTrace, ModelError> {
    let d = nbhd.center.len();
    check_dim(nbhd.entities.len(), nbhd.relations.len())?;
    check_dim(d, bias.len())?;
    check_dim(d, weight.len())?;
    for row in weight {
        check_dim(d, row.len())?;
    }
    for (e, r) in nbhd.entities.iter().zip(&nbhd.relations) {
        check_dim(d, e.len())?;
        check_dim(d, r.len())?;
    }

    let scores: Vec<f64> = nbhd
        .entities
        .iter()
        .zip(&nbhd.relations)
        .map(|(e, r)| dot(r, e))
        .collect();
    let alphas = if scores.is_empty() {
        Vec::new()
    } else {
        softmax(&scores)
    };
    let mut input_sum = nbhd.center.to_vec();
    for (alpha, e) in alphas.iter().zip(&nbhd.entities) {
        for (acc, x) in input_sum.iter_mut().zip(*e) {
            *acc += alpha * x;
        }
    }
    let pre_activation: Vec<f64> = weight
        .iter()
        .zip(bias)
        .map(|(row, b)| dot(row, &input_sum) + b)
        .collect();
    let output = pre_activation
        .iter()
        .map(|&x| activation.apply(x))
        .collect();
    Ok(ConvTrace {
        alphas,
        input_sum,
        pre_activation,
        output,
    })
}

/// One convolution step; see [`kg_conv_traced`] for the definition.
pub fn kg_conv(
    nbhd: &ConvNeighborhood<'_>,
    weight: &[Vec<f64>],
    bias: &[f64],
    activation: Activation,
) -> Result<Vec<f64>, ModelError> {
    Ok(kg_conv_traced(nbhd, weight, bias, activation)?.output)
}

/// Project `e` onto the hyperplane orthogonal to `w`: `e − (ŵᵀe)ŵ` with
/// `ŵ = w/‖w‖`. The input hyperplane vector need not be unit length.
pub fn transh_project(e: &[f64], w: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_dim(e.len(), w.len())?;
    let n = norm(w);
    if n == 0.0 {
        return Err(ModelError::ZeroProjectionVector);
    }
    let unit: Vec<f64> = w.iter().map(|x| x / n).collect();
    let along = dot(&unit, e);
    Ok(e.iter().zip(&unit).map(|(x, u)| x - along * u).collect())
}

/// Cosine similarity; zero whenever either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Interaction translation assembled from the endpoints' intent vectors.
///
/// Builds the flattened pairwise cosine vector `P` (entry `p·|S_i|+q` is
/// `cos(z_u[p], z_i[q])`) and difference rows `D[p·|S_i|+q] = z_i[q] −
/// z_u[p]`, then returns `softmax(P)ᵀ D`: similar intent pairs dominate and
/// shared intents pull the translation toward zero.
pub fn intent_relation<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    z_u: &[A],
    z_i: &[B],
) -> Result<Vec<f64>, ModelError> {
    if z_u.is_empty() || z_i.is_empty() {
        return Err(ModelError::EmptyIntentSet);
    }
    let d = z_u[0].as_ref().len();
    for z in z_u {
        check_dim(d, z.as_ref().len())?;
    }
    for z in z_i {
        check_dim(d, z.as_ref().len())?;
    }
    let mut sims = Vec::with_capacity(z_u.len() * z_i.len());
    for zu in z_u {
        for zi in z_i {
            sims.push(cosine(zu.as_ref(), zi.as_ref()));
        }
    }
    let weights = softmax(&sims);
    let mut out = vec![0.0; d];
    let mut w = weights.iter();
    for zu in z_u {
        for zi in z_i {
            let weight = *w.next().expect("one weight per pair");
            for ((acc, i), u) in out.iter_mut().zip(zi.as_ref()).zip(zu.as_ref()) {
                *acc += weight * (i - u);
            }
        }
    }
    Ok(out)
}

/// Translation energy `‖proj(h) + r − proj(t)‖`; lower means more plausible.
pub fn energy(h: &[f64], t: &[f64], r: &[f64], w: &[f64]) -> Result<f64, ModelError> {
    check_dim(h.len(), t.len())?;
    check_dim(h.len(), r.len())?;
    let hp = transh_project(h, w)?;
    let tp = transh_project(t, w)?;
    let gap: Vec<f64> = hp
        .iter()
        .zip(&tp)
        .zip(r)
        .map(|((hx, tx), rx)| hx + rx - tx)
        .collect();
    Ok(norm(&gap))
}

/// Loss of one positive/negative pair of energies: `−ln σ(f_neg − f_pos)`.
pub fn pair_loss(f_pos: f64, f_neg: f64) -> f64 {
    softplus(f_pos - f_neg)
}

/// Summed log-sigmoid ranking loss over paired positive/negative energies.
/// Regularization terms are added by the caller, not here.
pub fn ranking_loss(positives: &[f64], negatives: &[f64]) -> f64 {
    assert_eq!(
        positives.len(),
        negatives.len(),
        "one negative per positive"
    );
    positives
        .iter()
        .zip(negatives)
        .map(|(p, n)| pair_loss(*p, *n))
        .sum()
}

/// Dot-product edge plausibility for the convolution-only model.
pub fn plausibility(u: &[f64], i: &[f64]) -> f64 {
    dot(u, i)
}

// ---------------------------------------------------------------------------
// whole-graph convolution
// ---------------------------------------------------------------------------

/// Trace of one whole-graph convolution layer.
#[derive(Debug, Clone)]
pub(super) struct LayerTrace {
    /// Node embeddings fed into this layer (N × d).
    pub input: Vec<Vec<f64>>,
    /// Per-node step traces, indexed by node position.
    pub nodes: Vec<ConvTrace>,
}

/// Trace of the full convolution stack.
#[derive(Debug, Clone)]
pub(super) struct FullConvTrace {
    pub layers: Vec<LayerTrace>,
    /// Final embeddings (N × d); equals the raw entities when depth is 0.
    pub output: Vec<Vec<f64>>,
}

fn conv_layer(
    index: &ModelIndex,
    input: &[Vec<f64>],
    params: &ModelParameters,
    activation: Activation,
) -> Result<Vec<ConvTrace>, ModelError> {
    (0..index.node_count())
        .into_par_iter()
        .map(|p| {
            let mut entities = Vec::with_capacity(index.adjacency[p].len());
            let mut relations = Vec::with_capacity(index.adjacency[p].len());
            for (q, slot) in &index.adjacency[p] {
                entities.push(input[*q].as_slice());
                relations.push(params.relations[slot.index()].as_slice());
            }
            let nbhd = ConvNeighborhood {
                center: &input[p],
                entities,
                relations,
            };
            kg_conv_traced(&nbhd, &params.conv_weight, &params.conv_bias, activation)
        })
        .collect()
}

/// Run `layers` convolution steps over every node, keeping per-layer traces.
/// Relation vectors enter attention scores but are not themselves convolved;
/// the affine map is shared across layers.
pub(super) fn full_conv_traced(
    index: &ModelIndex,
    params: &ModelParameters,
    layers: usize,
    activation: Activation,
) -> Result<FullConvTrace, ModelError> {
    let mut current: Vec<Vec<f64>> = params.entities.clone();
    let mut trace = FullConvTrace {
        layers: Vec::with_capacity(layers),
        output: Vec::new(),
    };
    for _ in 0..layers {
        let nodes = conv_layer(index, &current, params, activation)?;
        let next: Vec<Vec<f64>> = nodes.iter().map(|t| t.output.clone()).collect();
        trace.layers.push(LayerTrace {
            input: current,
            nodes,
        });
        current = next;
    }
    trace.output = current;
    Ok(trace)
}

/// Post-convolution embeddings for every node (N × d). Depth 0 returns the
/// raw entity rows.
pub fn full_conv(
    index: &ModelIndex,
    params: &ModelParameters,
    layers: usize,
    activation: Activation,
) -> Result<Vec<Vec<f64>>, ModelError> {
    Ok(full_conv_traced(index, params, layers, activation)?.output)
}

// ---------------------------------------------------------------------------
// edge scoring against frozen parameters
// ---------------------------------------------------------------------------

/// Frozen post-convolution embeddings plus the pieces needed to score edges.
/// Build once, then score any number of pairs concurrently.
#[derive(Debug, Clone)]
pub struct ForwardContext {
    /// Post-convolution node embeddings, indexed by node position.
    pub convolved: Vec<Vec<f64>>,
}

impl ForwardContext {
    pub fn new(
        index: &ModelIndex,
        params: &ModelParameters,
        config: &TrainConfig,
    ) -> Result<Self, ModelError> {
        let convolved = full_conv(
            index,
            params,
            config.effective_conv_layers(),
            config.activation,
        )?;
        Ok(ForwardContext { convolved })
    }

    /// Convolved intent-neighbor vectors of a node, in index order.
    pub fn intent_vectors(&self, index: &ModelIndex, p: usize) -> Vec<&[f64]> {
        index.intent_neighbors[p]
            .iter()
            .map(|q| self.convolved[*q].as_slice())
            .collect()
    }

    /// Translation vector for a triple in the given slot. Interaction edges
    /// under the intent-prior variant derive it from the endpoints' intent
    /// neighborhoods, falling back to the trained generic row when either
    /// side has none; every other case reads the trained row directly.
    pub fn relation_vector(
        &self,
        index: &ModelIndex,
        params: &ModelParameters,
        variant: ModelVariant,
        head: usize,
        tail: usize,
        slot: RelationSlot,
    ) -> Result<Vec<f64>, ModelError> {
        if slot == RelationSlot::Consumes && variant.uses_intent_relation() {
            let z_u = self.intent_vectors(index, head);
            let z_i = self.intent_vectors(index, tail);
            match intent_relation(&z_u, &z_i) {
                Ok(r) => return Ok(r),
                Err(ModelError::EmptyIntentSet) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(params.relations[slot.index()].clone())
    }

    /// Plausibility of a triple (higher is better): negative translation
    /// energy, except the convolution-only variant which uses the dot
    /// product of the convolved endpoints.
    pub fn triple_plausibility(
        &self,
        index: &ModelIndex,
        params: &ModelParameters,
        variant: ModelVariant,
        head: usize,
        tail: usize,
        slot: RelationSlot,
    ) -> Result<f64, ModelError> {
        if variant == ModelVariant::VanillaGnn {
            return Ok(plausibility(&self.convolved[head], &self.convolved[tail]));
        }
        let r = self.relation_vector(index, params, variant, head, tail, slot)?;
        let f = energy(
            &self.convolved[head],
            &self.convolved[tail],
            &r,
            &params.hyperplanes[slot.index()],
        )?;
        Ok(-f)
    }

    /// Probability-like edge score via the logistic link, monotone in
    /// plausibility.
    pub fn triple_probability(
        &self,
        index: &ModelIndex,
        params: &ModelParameters,
        variant: ModelVariant,
        head: usize,
        tail: usize,
        slot: RelationSlot,
    ) -> Result<f64, ModelError> {
        Ok(sigmoid(self.triple_plausibility(
            index, params, variant, head, tail, slot,
        )?))
    }
}

/// Interaction plausibility of `(user, item)` end to end: convolve the whole
/// graph, derive the interaction translation from the endpoints' convolved
/// intent neighbors (generic-row fallback when either side has none), and
/// return the negated translation energy.
pub fn forward_score(
    index: &ModelIndex,
    params: &ModelParameters,
    config: &TrainConfig,
    user: NodeId,
    item: NodeId,
) -> Result<f64, ModelError> {
    let u = index.require(user)?;
    let i = index.require(item)?;
    let ctx = ForwardContext::new(index, params, config)?;
    ctx.triple_plausibility(index, params, config.variant, u, i, RelationSlot::Consumes)
}
