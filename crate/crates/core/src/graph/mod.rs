//! Heterogeneous intent knowledge graph.
//!
//! Nodes are users, items, or explicit intent entities; edges are typed
//! triples with a provenance tag. The store owns node identity, adjacency,
//! canonical intent merging, and a line-oriented persistence format.
//!
//! Structure invariants enforced here:
//! - node ids are unique and kinds immutable after creation;
//! - no two intent nodes share a canonical (trimmed, case-folded) label;
//! - endpoint kinds always satisfy the relation contract
//!   (user→item for consumption, user→intent / item→intent for intents);
//! - no duplicate `(head, tail, relation)` triples and no self-loops.
//!
//! Mutation requires `&mut`; reads are safe to share across threads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::label;

/// Opaque node identifier, unique within a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The three node populations of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    User,
    Item,
    Intent,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::User => "user",
            NodeKind::Item => "item",
            NodeKind::Intent => "intent",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "user" => Some(NodeKind::User),
            "item" => Some(NodeKind::Item),
            "intent" => Some(NodeKind::Intent),
            _ => None,
        }
    }
}

/// Typed relation of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    /// User → Item, implicit-feedback interaction.
    UserConsumesItem,
    /// User → Intent.
    UserPossessesIntent,
    /// Item → Intent.
    ItemSatisfiesIntent,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::UserConsumesItem => "consumes",
            RelationKind::UserPossessesIntent => "possesses",
            RelationKind::ItemSatisfiesIntent => "satisfies",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "consumes" => Some(RelationKind::UserConsumesItem),
            "possesses" => Some(RelationKind::UserPossessesIntent),
            "satisfies" => Some(RelationKind::ItemSatisfiesIntent),
            _ => None,
        }
    }

    /// Required (head, tail) kinds for this relation.
    pub fn endpoint_kinds(self) -> (NodeKind, NodeKind) {
        match self {
            RelationKind::UserConsumesItem => (NodeKind::User, NodeKind::Item),
            RelationKind::UserPossessesIntent => (NodeKind::User, NodeKind::Intent),
            RelationKind::ItemSatisfiesIntent => (NodeKind::Item, NodeKind::Intent),
        }
    }

    /// True for the user→intent / item→intent relations.
    pub fn is_intent_relation(self) -> bool {
        !matches!(self, RelationKind::UserConsumesItem)
    }
}

/// How an intent edge was produced. Interaction edges carry `NotApplicable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    /// Round-1 extraction directly from the subject's own text.
    Exact,
    /// Round-2 selection from retrieved candidate intents.
    Related,
    /// Interaction edges, which have no extraction provenance.
    NotApplicable,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Related => "related",
            Provenance::NotApplicable => "na",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Provenance::Exact),
            "related" => Some(Provenance::Related),
            "na" => Some(Provenance::NotApplicable),
            _ => None,
        }
    }
}

/// A node record: identity, kind, display label.
///
/// For intent nodes the label is the first-seen surface form; comparison and
/// merging always go through [`label::canonical`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
}

/// A directed triple with provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub head: NodeId,
    pub tail: NodeId,
    pub relation: RelationKind,
    pub provenance: Provenance,
}

/// One adjacency entry as seen from a node: the opposite endpoint plus the
/// edge's typing. `is_head` records whether the viewing node is the head, so
/// traversal is undirected while triples keep their roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjEntry {
    pub other: NodeId,
    pub relation: RelationKind,
    pub provenance: Provenance,
    pub is_head: bool,
}

/// Errors raised by graph operations.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("relation {relation:?} cannot connect {head:?} -> {tail:?}")]
    KindMismatch {
        relation: RelationKind,
        head: NodeKind,
        tail: NodeKind,
    },
    #[error("duplicate edge ({0}, {1}, {2:?})")]
    DuplicateEdge(NodeId, NodeId, RelationKind),
    #[error("no such edge ({0}, {1}, {2:?})")]
    MissingEdge(NodeId, NodeId, RelationKind),
    #[error("provenance {provenance:?} is invalid for relation {relation:?}")]
    InvalidProvenance {
        relation: RelationKind,
        provenance: Provenance,
    },
    #[error("intent node must have a non-empty label")]
    EmptyIntentLabel,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("format violation at line {line}: {message}")]
    FormatViolation { line: usize, message: String },
}

/// Result of [`IntentGraph::canonicalize_and_merge`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MergeReport {
    /// Intent nodes absorbed into a canonical representative.
    pub merged_nodes: usize,
    /// Edges dropped because re-pointing made them duplicates.
    pub deduplicated_edges: usize,
}

/// Per-kind counts in the shape of the dataset statistics table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GraphStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub intents: usize,
    pub intent_edges: usize,
    pub avg_intent_degree: f64,
}

/// The heterogeneous intent knowledge graph.
#[derive(Debug, Clone, Default)]
pub struct IntentGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    edge_set: HashSet<(NodeId, NodeId, RelationKind)>,
    adjacency: HashMap<NodeId, Vec<AdjEntry>>,
    intent_by_canonical: HashMap<String, NodeId>,
    next_id: u64,
}

impl IntentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Add a user node. User labels are external keys and are not deduplicated.
    pub fn add_user(&mut self, key: impl Into<String>) -> NodeId {
        let id = self.fresh_id();
        self.insert_node(Node {
            id,
            kind: NodeKind::User,
            label: key.into(),
        });
        id
    }

    /// Add an item node. Item labels are display names and may repeat.
    pub fn add_item(&mut self, name: impl Into<String>) -> NodeId {
        let id = self.fresh_id();
        self.insert_node(Node {
            id,
            kind: NodeKind::Item,
            label: name.into(),
        });
        id
    }

    /// Get the intent node for a label, creating it if absent.
    ///
    /// Lookup is by canonical form; the first-seen surface form is kept for
    /// display. Errors on blank labels.
    pub fn intent(&mut self, surface: &str) -> Result<NodeId, GraphError> {
        if label::is_blank(surface) {
            return Err(GraphError::EmptyIntentLabel);
        }
        let canon = label::canonical(surface);
        if let Some(&id) = self.intent_by_canonical.get(&canon) {
            return Ok(id);
        }
        let id = self.fresh_id();
        self.insert_node(Node {
            id,
            kind: NodeKind::Intent,
            label: surface.trim().to_string(),
        });
        self.intent_by_canonical.insert(canon, id);
        Ok(id)
    }

    /// Look up an existing intent node by (any casing of) its label.
    pub fn find_intent(&self, surface: &str) -> Option<NodeId> {
        self.intent_by_canonical
            .get(&label::canonical(surface))
            .copied()
    }

    fn insert_node(&mut self, node: Node) {
        self.adjacency.insert(node.id, Vec::new());
        self.nodes.insert(node.id, node);
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, head: NodeId, tail: NodeId, relation: RelationKind) -> bool {
        self.edge_set.contains(&(head, tail, relation))
    }

    /// Number of edges incident to a node.
    pub fn degree(&self, id: NodeId) -> Result<usize, GraphError> {
        self.adjacency
            .get(&id)
            .map(Vec::len)
            .ok_or(GraphError::UnknownNode(id))
    }

    /// Degree counting only edges of the given relation.
    pub fn degree_by_relation(
        &self,
        id: NodeId,
        relation: RelationKind,
    ) -> Result<usize, GraphError> {
        Ok(self
            .adjacency
            .get(&id)
            .ok_or(GraphError::UnknownNode(id))?
            .iter()
            .filter(|e| e.relation == relation)
            .count())
    }

    /// Insert a typed edge.
    ///
    /// Both endpoints must exist, kinds must satisfy the relation contract,
    /// and the `(head, tail, relation)` triple must be new. Repeated
    /// interactions collapse to one edge by design; re-adding is an error the
    /// caller may treat as idempotent success.
    pub fn add_edge(
        &mut self,
        head: NodeId,
        tail: NodeId,
        relation: RelationKind,
        provenance: Provenance,
    ) -> Result<Edge, GraphError> {
        let head_kind = self.nodes.get(&head).ok_or(GraphError::UnknownNode(head))?.kind;
        let tail_kind = self.nodes.get(&tail).ok_or(GraphError::UnknownNode(tail))?.kind;
        let (want_head, want_tail) = relation.endpoint_kinds();
        if head_kind != want_head || tail_kind != want_tail {
            return Err(GraphError::KindMismatch {
                relation,
                head: head_kind,
                tail: tail_kind,
            });
        }
        let prov_ok = match relation {
            RelationKind::UserConsumesItem => provenance == Provenance::NotApplicable,
            _ => matches!(provenance, Provenance::Exact | Provenance::Related),
        };
        if !prov_ok {
            return Err(GraphError::InvalidProvenance {
                relation,
                provenance,
            });
        }
        if !self.edge_set.insert((head, tail, relation)) {
            return Err(GraphError::DuplicateEdge(head, tail, relation));
        }
        let edge = Edge {
            head,
            tail,
            relation,
            provenance,
        };
        self.edges.push(edge);
        self.push_adj(head, AdjEntry {
            other: tail,
            relation,
            provenance,
            is_head: true,
        });
        self.push_adj(tail, AdjEntry {
            other: head,
            relation,
            provenance,
            is_head: false,
        });
        Ok(edge)
    }

    /// Remove one edge identified by its endpoints and relation.
    pub fn remove_edge(
        &mut self,
        head: NodeId,
        tail: NodeId,
        relation: RelationKind,
    ) -> Result<(), GraphError> {
        if !self.edge_set.remove(&(head, tail, relation)) {
            return Err(GraphError::MissingEdge(head, tail, relation));
        }
        self.edges
            .retain(|e| !(e.head == head && e.tail == tail && e.relation == relation));
        self.drop_adj(head, tail, relation);
        self.drop_adj(tail, head, relation);
        Ok(())
    }

    /// Remove a node together with every incident edge. The node's id is
    /// never reused.
    pub fn remove_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        let node = self.nodes.remove(&id).ok_or(GraphError::UnknownNode(id))?;
        let incident = self.adjacency.remove(&id).unwrap_or_default();
        for entry in incident {
            let key = if entry.is_head {
                (id, entry.other, entry.relation)
            } else {
                (entry.other, id, entry.relation)
            };
            self.edge_set.remove(&key);
            self.drop_adj(entry.other, id, entry.relation);
        }
        self.edges.retain(|e| e.head != id && e.tail != id);
        if node.kind == NodeKind::Intent {
            let canon = label::canonical(&node.label);
            if self.intent_by_canonical.get(&canon) == Some(&id) {
                self.intent_by_canonical.remove(&canon);
            }
        }
        Ok(())
    }

    fn drop_adj(&mut self, at: NodeId, other: NodeId, relation: RelationKind) {
        if let Some(list) = self.adjacency.get_mut(&at) {
            list.retain(|e| !(e.other == other && e.relation == relation));
        }
    }

    fn push_adj(&mut self, at: NodeId, entry: AdjEntry) {
        let list = self.adjacency.get_mut(&at).expect("endpoint checked");
        // keep sorted by (other, relation) so traversal order is deterministic
        let pos = list
            .binary_search_by(|e| (e.other, e.relation).cmp(&(entry.other, entry.relation)))
            .unwrap_or_else(|p| p);
        list.insert(pos, entry);
    }

    /// Opposite endpoints of every incident edge, ascending by neighbor id,
    /// optionally filtered by relation.
    pub fn neighbors(
        &self,
        id: NodeId,
        filter: Option<RelationKind>,
    ) -> Result<Vec<(NodeId, RelationKind)>, GraphError> {
        Ok(self
            .adjacency_of(id)?
            .iter()
            .filter(|e| filter.map_or(true, |f| e.relation == f))
            .map(|e| (e.other, e.relation))
            .collect())
    }

    /// Full adjacency entries for a node (sorted by neighbor id).
    pub fn adjacency_of(&self, id: NodeId) -> Result<&[AdjEntry], GraphError> {
        self.adjacency
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownNode(id))
    }

    /// Intent neighbors of a user or item node, ascending by id.
    pub fn intent_neighbors(&self, id: NodeId) -> Result<Vec<NodeId>, GraphError> {
        Ok(self
            .adjacency_of(id)?
            .iter()
            .filter(|e| e.relation.is_intent_relation())
            .map(|e| e.other)
            .collect())
    }

    /// Collapse intent nodes whose labels are canonically equal.
    ///
    /// The earliest-created node of each group survives and keeps its surface
    /// form; edges of absorbed nodes are re-pointed. When re-pointing
    /// collides with an existing triple the edge is dropped, keeping `Exact`
    /// provenance over `Related` if the two disagree. Idempotent.
    pub fn canonicalize_and_merge(&mut self) -> MergeReport {
        let mut representative: HashMap<String, NodeId> = HashMap::new();
        let mut remap: HashMap<NodeId, NodeId> = HashMap::new();
        for node in self.nodes.values() {
            if node.kind != NodeKind::Intent {
                continue;
            }
            let canon = label::canonical(&node.label);
            match representative.get(&canon) {
                Some(&rep) => {
                    remap.insert(node.id, rep);
                }
                None => {
                    representative.insert(canon, node.id);
                }
            }
        }
        if remap.is_empty() {
            // still refresh the canonical index; cheap and keeps it honest
            self.intent_by_canonical = representative;
            return MergeReport::default();
        }

        let mut report = MergeReport {
            merged_nodes: remap.len(),
            deduplicated_edges: 0,
        };

        let old_edges = std::mem::take(&mut self.edges);
        self.edge_set.clear();
        for list in self.adjacency.values_mut() {
            list.clear();
        }
        for dup in remap.keys() {
            self.nodes.remove(dup);
            self.adjacency.remove(dup);
        }

        // first pass keyed by triple: prefer Exact when duplicates collide
        let mut chosen: BTreeMap<(NodeId, NodeId, RelationKind), Provenance> = BTreeMap::new();
        let mut order: Vec<(NodeId, NodeId, RelationKind)> = Vec::new();
        for e in &old_edges {
            let head = *remap.get(&e.head).unwrap_or(&e.head);
            let tail = *remap.get(&e.tail).unwrap_or(&e.tail);
            let key = (head, tail, e.relation);
            match chosen.get_mut(&key) {
                Some(existing) => {
                    report.deduplicated_edges += 1;
                    if *existing == Provenance::Related && e.provenance == Provenance::Exact {
                        *existing = Provenance::Exact;
                    }
                }
                None => {
                    chosen.insert(key, e.provenance);
                    order.push(key);
                }
            }
        }
        for key in order {
            let (head, tail, relation) = key;
            let provenance = chosen[&key];
            self.add_edge(head, tail, relation, provenance)
                .expect("re-pointed edge must be valid");
        }
        self.intent_by_canonical = representative;
        report
    }

    /// Node/edge counts per kind.
    pub fn stats(&self) -> GraphStats {
        let mut s = GraphStats::default();
        for n in self.nodes.values() {
            match n.kind {
                NodeKind::User => s.users += 1,
                NodeKind::Item => s.items += 1,
                NodeKind::Intent => s.intents += 1,
            }
        }
        for e in &self.edges {
            if e.relation == RelationKind::UserConsumesItem {
                s.interactions += 1;
            } else {
                s.intent_edges += 1;
            }
        }
        s.avg_intent_degree = if s.intents == 0 {
            0.0
        } else {
            s.intent_edges as f64 / s.intents as f64
        };
        s
    }

    /// Full-scan consistency check used by tests and after bulk operations.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut degree_sum = 0usize;
        for (id, list) in &self.adjacency {
            if !self.nodes.contains_key(id) {
                return Err(format!("adjacency for unknown node {id}"));
            }
            degree_sum += list.len();
        }
        if degree_sum != 2 * self.edges.len() {
            return Err(format!(
                "degree sum {} != 2 * edges {}",
                degree_sum,
                self.edges.len()
            ));
        }
        let mut rebuilt: HashMap<NodeId, Vec<AdjEntry>> = HashMap::new();
        for e in &self.edges {
            let (want_head, want_tail) = e.relation.endpoint_kinds();
            let hk = self.nodes.get(&e.head).ok_or("edge head missing")?.kind;
            let tk = self.nodes.get(&e.tail).ok_or("edge tail missing")?.kind;
            if hk != want_head || tk != want_tail {
                return Err(format!("edge {e:?} violates kind contract"));
            }
            if e.head == e.tail {
                return Err(format!("self loop {e:?}"));
            }
            rebuilt.entry(e.head).or_default().push(AdjEntry {
                other: e.tail,
                relation: e.relation,
                provenance: e.provenance,
                is_head: true,
            });
            rebuilt.entry(e.tail).or_default().push(AdjEntry {
                other: e.head,
                relation: e.relation,
                provenance: e.provenance,
                is_head: false,
            });
        }
        for (id, list) in &self.adjacency {
            let mut want = rebuilt.remove(id).unwrap_or_default();
            want.sort_by_key(|e| (e.other, e.relation));
            if want != *list {
                return Err(format!("adjacency mismatch at node {id}"));
            }
        }
        let mut seen = HashSet::new();
        for n in self.nodes.values() {
            if n.kind == NodeKind::Intent && !seen.insert(label::canonical(&n.label)) {
                return Err(format!("duplicate canonical intent label {:?}", n.label));
            }
        }
        Ok(())
    }

    /// Write the graph in the line-oriented text format.
    pub fn save<W: Write>(&self, dest: W) -> Result<(), GraphError> {
        let mut w = BufWriter::new(dest);
        writeln!(w, "#nodes")?;
        for n in self.nodes.values() {
            writeln!(w, "{}\t{}\t{}", n.id, n.kind.as_str(), escape(&n.label))?;
        }
        writeln!(w, "#edges")?;
        for e in &self.edges {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                e.head,
                e.tail,
                e.relation.as_str(),
                e.provenance.as_str()
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> Result<(), GraphError> {
        let file = std::fs::File::create(path)?;
        self.save(file)
    }

    /// Parse a graph previously written by [`IntentGraph::save`].
    pub fn load<R: std::io::Read>(source: R) -> Result<Self, GraphError> {
        #[derive(PartialEq)]
        enum Section {
            Preamble,
            Nodes,
            Edges,
        }
        let violation = |line: usize, message: &str| GraphError::FormatViolation {
            line,
            message: message.to_string(),
        };
        let mut graph = IntentGraph::new();
        let mut section = Section::Preamble;
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line == "#nodes" {
                if section != Section::Preamble {
                    return Err(violation(lineno, "unexpected #nodes section"));
                }
                section = Section::Nodes;
                continue;
            }
            if line == "#edges" {
                if section != Section::Nodes {
                    return Err(violation(lineno, "unexpected #edges section"));
                }
                section = Section::Edges;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match section {
                Section::Preamble => {
                    return Err(violation(lineno, "expected #nodes header"));
                }
                Section::Nodes => {
                    let mut parts = line.split('\t');
                    let (id, kind, lbl) = match (parts.next(), parts.next(), parts.next()) {
                        (Some(a), Some(b), Some(c)) => (a, b, c),
                        _ => return Err(violation(lineno, "node record needs id\\tkind\\tlabel")),
                    };
                    if parts.next().is_some() {
                        return Err(violation(lineno, "trailing fields in node record"));
                    }
                    let id: u64 = id
                        .parse()
                        .map_err(|_| violation(lineno, "node id is not an integer"))?;
                    let kind = NodeKind::parse(kind)
                        .ok_or_else(|| violation(lineno, "unknown node kind"))?;
                    let id = NodeId(id);
                    if graph.nodes.contains_key(&id) {
                        return Err(violation(lineno, "duplicate node id"));
                    }
                    let lbl = unescape(lbl)
                        .ok_or_else(|| violation(lineno, "bad escape in label"))?;
                    if kind == NodeKind::Intent {
                        let canon = label::canonical(&lbl);
                        if canon.is_empty() {
                            return Err(violation(lineno, "intent label is blank"));
                        }
                        if graph.intent_by_canonical.contains_key(&canon) {
                            return Err(violation(lineno, "duplicate canonical intent label"));
                        }
                        graph.intent_by_canonical.insert(canon, id);
                    }
                    graph.insert_node(Node { id, kind, label: lbl });
                    graph.next_id = graph.next_id.max(id.0 + 1);
                }
                Section::Edges => {
                    let mut parts = line.split('\t');
                    let (h, t, r, p) =
                        match (parts.next(), parts.next(), parts.next(), parts.next()) {
                            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                            _ => {
                                return Err(violation(
                                    lineno,
                                    "edge record needs head\\ttail\\trelation\\tprovenance",
                                ))
                            }
                        };
                    if parts.next().is_some() {
                        return Err(violation(lineno, "trailing fields in edge record"));
                    }
                    let head = NodeId(
                        h.parse()
                            .map_err(|_| violation(lineno, "head id is not an integer"))?,
                    );
                    let tail = NodeId(
                        t.parse()
                            .map_err(|_| violation(lineno, "tail id is not an integer"))?,
                    );
                    let relation = RelationKind::parse(r)
                        .ok_or_else(|| violation(lineno, "unknown relation"))?;
                    let provenance = Provenance::parse(p)
                        .ok_or_else(|| violation(lineno, "unknown provenance"))?;
                    graph
                        .add_edge(head, tail, relation, provenance)
                        .map_err(|e| violation(lineno, &e.to_string()))?;
                }
            }
        }
        Ok(graph)
    }

    pub fn load_from_path(path: &Path) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Self::load(file)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}
