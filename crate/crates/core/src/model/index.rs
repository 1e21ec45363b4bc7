//! Dense, position-indexed snapshot of a graph for training and scoring.

use std::collections::{HashMap, HashSet};

use crate::graph::{IntentGraph, NodeId, NodeKind, RelationKind};

use super::params::RelationSlot;
use super::ModelError;

/// Immutable view of a graph with nodes renumbered to dense positions.
///
/// Row `p` of every parameter matrix belongs to `node_ids[p]`; node ids are
/// sorted ascending so the mapping is reproducible from the graph alone.
/// Adjacency is undirected (each edge contributes an entry at both ends) and
/// sorted, which pins the floating-point summation order everywhere.
#[derive(Debug, Clone)]
pub struct ModelIndex {
    /// Graph node ids in ascending order.
    pub node_ids: Vec<NodeId>,
    /// Node kind per position.
    pub kinds: Vec<NodeKind>,
    /// Per node: `(neighbor position, relation slot)` sorted ascending.
    pub adjacency: Vec<Vec<(usize, RelationSlot)>>,
    /// Per node: positions of intent neighbors reached as head of an intent
    /// edge, sorted ascending. Empty for intent nodes.
    pub intent_neighbors: Vec<Vec<usize>>,
    /// Positions of every user, item, and intent node, each sorted.
    pub users: Vec<usize>,
    pub items: Vec<usize>,
    pub intents: Vec<usize>,
    /// Training positives: `(head, tail, slot)` sorted ascending.
    pub edges: Vec<(usize, usize, RelationSlot)>,
    edge_set: HashSet<(usize, usize, RelationKind)>,
    pos_by_id: HashMap<NodeId, usize>,
}

impl ModelIndex {
    pub fn build(graph: &IntentGraph) -> Self {
        let mut node_ids: Vec<NodeId> = graph.nodes().map(|n| n.id).collect();
        node_ids.sort_unstable();
        let pos_by_id: HashMap<NodeId, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(p, id)| (*id, p))
            .collect();
        let kinds: Vec<NodeKind> = node_ids
            .iter()
            .map(|id| graph.node(*id).expect("listed node exists").kind)
            .collect();

        let n = node_ids.len();
        let mut adjacency: Vec<Vec<(usize, RelationSlot)>> = vec![Vec::new(); n];
        let mut intent_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(graph.edge_count());
        let mut edge_set = HashSet::with_capacity(graph.edge_count());
        for edge in graph.edges() {
            let h = pos_by_id[&edge.head];
            let t = pos_by_id[&edge.tail];
            let slot = RelationSlot::of(edge.relation, edge.provenance);
            adjacency[h].push((t, slot));
            adjacency[t].push((h, slot));
            edges.push((h, t, slot));
            edge_set.insert((h, t, edge.relation));
            if edge.relation.is_intent_relation() {
                intent_neighbors[h].push(t);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        for list in &mut intent_neighbors {
            list.sort_unstable();
        }
        edges.sort_unstable();

        let by_kind = |want: NodeKind| -> Vec<usize> {
            kinds
                .iter()
                .enumerate()
                .filter(|(_, k)| **k == want)
                .map(|(p, _)| p)
                .collect()
        };
        ModelIndex {
            users: by_kind(NodeKind::User),
            items: by_kind(NodeKind::Item),
            intents: by_kind(NodeKind::Intent),
            node_ids,
            kinds,
            adjacency,
            intent_neighbors,
            edges,
            edge_set,
            pos_by_id,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.pos_by_id.get(&id).copied()
    }

    /// Position lookup that fails loudly for foreign nodes.
    pub fn require(&self, id: NodeId) -> Result<usize, ModelError> {
        self.position(id).ok_or(ModelError::UnknownNode(id))
    }

    /// True-edge check by relation kind (provenance-insensitive), matching
    /// the graph's duplicate rule; used to reject colliding negatives.
    pub fn has_edge(&self, head: usize, tail: usize, relation: RelationKind) -> bool {
        self.edge_set.contains(&(head, tail, relation))
    }

    /// Candidate tails of the given kind, for negative sampling.
    pub fn candidates(&self, kind: NodeKind) -> &[usize] {
        match kind {
            NodeKind::User => &self.users,
            NodeKind::Item => &self.items,
            NodeKind::Intent => &self.intents,
        }
    }

    /// Number of user→item interaction edges.
    pub fn interaction_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|(_, _, s)| *s == RelationSlot::Consumes)
            .count()
    }
}
