//! Parameter tensors, training configuration, and checkpoint I/O.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::graph::{NodeId, Provenance, RelationKind};

use super::ModelError;

/// One trainable relation row per (relation, provenance) combination.
///
/// Splitting the two intent relations by provenance lets training weigh
/// model-stated intents differently from retrieved ones; the interaction
/// relation has a single row that doubles as the fallback translation when
/// an endpoint has no intents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationSlot {
    Consumes = 0,
    PossessesExact = 1,
    PossessesRelated = 2,
    SatisfiesExact = 3,
    SatisfiesRelated = 4,
}

impl RelationSlot {
    pub const COUNT: usize = 5;

    pub const ALL: [RelationSlot; 5] = [
        RelationSlot::Consumes,
        RelationSlot::PossessesExact,
        RelationSlot::PossessesRelated,
        RelationSlot::SatisfiesExact,
        RelationSlot::SatisfiesRelated,
    ];

    pub fn of(relation: RelationKind, provenance: Provenance) -> Self {
        match (relation, provenance) {
            (RelationKind::UserConsumesItem, _) => RelationSlot::Consumes,
            (RelationKind::UserPossessesIntent, Provenance::Related) => {
                RelationSlot::PossessesRelated
            }
            (RelationKind::UserPossessesIntent, _) => RelationSlot::PossessesExact,
            (RelationKind::ItemSatisfiesIntent, Provenance::Related) => {
                RelationSlot::SatisfiesRelated
            }
            (RelationKind::ItemSatisfiesIntent, _) => RelationSlot::SatisfiesExact,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn relation(self) -> RelationKind {
        match self {
            RelationSlot::Consumes => RelationKind::UserConsumesItem,
            RelationSlot::PossessesExact | RelationSlot::PossessesRelated => {
                RelationKind::UserPossessesIntent
            }
            RelationSlot::SatisfiesExact | RelationSlot::SatisfiesRelated => {
                RelationKind::ItemSatisfiesIntent
            }
        }
    }

    /// Node kind required at the tail of a triple using this slot.
    pub fn tail_kind(self) -> crate::graph::NodeKind {
        self.relation().endpoint_kinds().1
    }

    /// Slots a head of the given kind can appear in. Intents never head an
    /// edge.
    pub fn valid_for_head(kind: crate::graph::NodeKind) -> &'static [RelationSlot] {
        use crate::graph::NodeKind;
        match kind {
            NodeKind::User => &[
                RelationSlot::Consumes,
                RelationSlot::PossessesExact,
                RelationSlot::PossessesRelated,
            ],
            NodeKind::Item => &[RelationSlot::SatisfiesExact, RelationSlot::SatisfiesRelated],
            NodeKind::Intent => &[],
        }
    }

}

/// Convolution nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation input.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Which model is trained and how edges are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelVariant {
    /// Convolution + hyperplane translation with the intent-derived
    /// interaction relation. The full model.
    #[default]
    IntentPrior,
    /// Two convolution layers scored by plain dot product; no translation.
    VanillaGnn,
    /// Hyperplane translation on raw embeddings; all relations (including
    /// the interaction) use trained generic rows; no convolution.
    VanillaTranslation,
}

impl ModelVariant {
    /// Convolution depth this variant runs with.
    pub fn conv_layers(self, configured: usize) -> usize {
        match self {
            ModelVariant::IntentPrior => configured,
            ModelVariant::VanillaGnn => 2,
            ModelVariant::VanillaTranslation => 0,
        }
    }

    /// Whether interaction edges derive their translation from intents.
    pub fn uses_intent_relation(self) -> bool {
        matches!(self, ModelVariant::IntentPrior)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::IntentPrior => "intent-prior",
            ModelVariant::VanillaGnn => "vanilla-gnn",
            ModelVariant::VanillaTranslation => "vanilla-translation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "intent-prior" => Some(ModelVariant::IntentPrior),
            "vanilla-gnn" => Some(ModelVariant::VanillaGnn),
            "vanilla-translation" => Some(ModelVariant::VanillaTranslation),
            _ => None,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    /// Coefficient of the L2 penalty over every parameter tensor.
    pub weight_decay: f64,
    /// Coefficient of Σ max(0, ‖e‖² − 1) over entity rows.
    pub entity_norm_penalty: f64,
    /// Coefficient of Σ (‖w‖² − 1)² over hyperplane rows.
    pub hyperplane_norm_penalty: f64,
    /// Convolution depth for the full model; 1 or 2.
    pub conv_layers: usize,
    pub activation: Activation,
    pub variant: ModelVariant,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 128,
            negatives_per_positive: 1,
            weight_decay: 1e-5,
            entity_norm_penalty: 1e-3,
            hyperplane_norm_penalty: 1e-3,
            conv_layers: 1,
            activation: Activation::Tanh,
            variant: ModelVariant::default(),
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive: [(&str, f64); 4] = [
            ("dim", self.dim as f64),
            ("learning_rate", self.learning_rate),
            ("batch_size", self.batch_size as f64),
            ("negatives_per_positive", self.negatives_per_positive as f64),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let non_negative: [(&str, f64); 3] = [
            ("weight_decay", self.weight_decay),
            ("entity_norm_penalty", self.entity_norm_penalty),
            ("hyperplane_norm_penalty", self.hyperplane_norm_penalty),
        ];
        for (name, value) in non_negative {
            if value < 0.0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        if !(self.conv_layers == 1 || self.conv_layers == 2) {
            return Err(ModelError::InvalidConfig(
                "conv_layers must be 1 or 2".to_string(),
            ));
        }
        Ok(())
    }

    /// Convolution depth after the variant's override.
    pub fn effective_conv_layers(&self) -> usize {
        self.variant.conv_layers(self.conv_layers)
    }
}

/// All trainable tensors. Entity rows are ordered by ascending node id of
/// the graph the model was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub dim: usize,
    /// N × d node embeddings.
    pub entities: Vec<Vec<f64>>,
    /// T_R × d relation translation vectors.
    pub relations: Vec<Vec<f64>>,
    /// T_R × d hyperplane projection vectors, kept near unit norm.
    pub hyperplanes: Vec<Vec<f64>>,
    /// d × d convolution weight, shared across layers.
    pub conv_weight: Vec<Vec<f64>>,
    /// d convolution bias.
    pub conv_bias: Vec<f64>,
}

impl ModelParameters {
    pub fn node_count(&self) -> usize {
        self.entities.len()
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
// checkpoint I/O
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"INTREC01";

/// Write a binary checkpoint: magic, u64 LE (d, N, T_R), a 32-byte config
/// hash, the node-id row mapping, then row-major little-endian f64 blocks
/// for entities, relations, hyperplanes, conv weight, and conv bias.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParameters,
    node_ids: &[NodeId],
    config_hash: &[u8; 32],
) -> Result<(), ModelError> {
    if node_ids.len() != params.entities.len() {
        return Err(ModelError::DimensionMismatch {
            expected: params.entities.len(),
            got: node_ids.len(),
        });
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    for value in [
        params.dim as u64,
        params.entities.len() as u64,
        RelationSlot::COUNT as u64,
    ] {
        w.write_all(&value.to_le_bytes())?;
    }
    w.write_all(config_hash)?;
    for id in node_ids {
        w.write_all(&id.0.to_le_bytes())?;
    }
    let blocks: [&[Vec<f64>]; 4] = [
        &params.entities,
        &params.relations,
        &params.hyperplanes,
        &params.conv_weight,
    ];
    for block in blocks {
        for row in block {
            for x in row {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    for x in &params.conv_bias {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(
    path: &Path,
) -> Result<(ModelParameters, Vec<NodeId>, [u8; 32]), ModelError> {
    let bad = |message: &str| ModelError::CheckpointFormat(message.to_string());
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| bad("file too short for header"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u64_buf = [0u8; 8];
    let mut read_u64 = |r: &mut BufReader<std::fs::File>| -> Result<u64, ModelError> {
        r.read_exact(&mut u64_buf)
            .map_err(|_| bad("truncated header"))?;
        Ok(u64::from_le_bytes(u64_buf))
    };
    let dim = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let t_r = read_u64(&mut r)? as usize;
    if t_r != RelationSlot::COUNT {
        return Err(bad("relation count mismatch"));
    }
    if dim == 0 || dim > 1 << 16 || n > 1 << 32 {
        return Err(bad("implausible dimensions"));
    }
    let mut config_hash = [0u8; 32];
    r.read_exact(&mut config_hash)
        .map_err(|_| bad("truncated config hash"))?;
    let mut node_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|_| bad("truncated node ids"))?;
        node_ids.push(NodeId(u64::from_le_bytes(buf)));
    }
    let mut read_block = |rows: usize, cols: usize| -> Result<Vec<Vec<f64>>, ModelError> {
        let mut block = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut row = Vec::with_capacity(cols);
            for _ in 0..cols {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf)
                    .map_err(|_| bad("truncated parameter block"))?;
                let x = f64::from_le_bytes(buf);
                if !x.is_finite() {
                    return Err(bad("non-finite parameter"));
                }
                row.push(x);
            }
            block.push(row);
        }
        Ok(block)
    };
    let entities = read_block(n, dim)?;
    let relations = read_block(RelationSlot::COUNT, dim)?;
    let hyperplanes = read_block(RelationSlot::COUNT, dim)?;
    let conv_weight = read_block(dim, dim)?;
    let conv_bias = read_block(1, dim)?.remove(0);
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after parameter blocks"));
    }
    Ok((
        ModelParameters {
            dim,
            entities,
            relations,
            hyperplanes,
            conv_weight,
            conv_bias,
        },
        node_ids,
        config_hash,
    ))
}
