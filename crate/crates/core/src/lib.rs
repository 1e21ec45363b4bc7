//! Intent-knowledge-graph recommender engine.
//!
//! The crate is organized around an offline pipeline:
//!
//! 1. [`graph`] — a heterogeneous knowledge graph over users, items, and
//!    explicit intent nodes with typed, provenance-tagged relations.
//! 2. [`extract`] — a two-round, retrieval-grounded LLM extraction pipeline
//!    that mines intent nodes from item/user text and densifies the graph.
//! 3. [`embed`] — text encoding and exact k-nearest-neighbor retrieval over
//!    the intent vocabulary.
//! 4. [`model`] — a translation-based GNN (one KG convolution layer plus a
//!    hyperplane-projection translation layer) trained with a log-sigmoid
//!    ranking loss and hand-rolled analytic gradients.
//! 5. [`score`] — inference-time hybrid scoring (embedding cosine + intent
//!    matching with a non-overlap penalty) and top-N ranking.
//! 6. [`eval`] — splitting, HR/NDCG/MRR metrics, cold-start slicing,
//!    ablation orchestration, and significance testing.
//! 7. [`pipeline`] — dataset ingestion, configuration, staged orchestration,
//!    and artifact/manifest management for the CLI.
//!
//! All LLM and encoder access goes through pluggable traits with
//! deterministic offline implementations, so the entire pipeline runs and
//! tests without network access.

pub mod embed;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod label;
pub mod model;
pub mod pipeline;
pub mod score;
pub mod synthetic;
