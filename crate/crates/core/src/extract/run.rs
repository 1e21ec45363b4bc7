//! The two-round extraction driver.
//!
//! Round 1 runs over every subject in parallel and unions the results into a
//! fixed intent vocabulary. That vocabulary is embedded into a retrieval
//! index, and round 2 offers each subject its top-k nearest vocabulary
//! entries — minus everything the subject already produced in round 1 — for
//! the model to pick related intents from. Finally the accumulated labels
//! are written into the graph as typed edges and intent duplicates are
//! merged.
//!
//! Per-subject client failures degrade to empty intent sets and are listed
//! in the report; only infrastructure failures (encoder, graph corruption)
//! abort the batch.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::embed::{build_index, TextEncoder};
use crate::graph::{GraphError, IntentGraph, NodeId, NodeKind, Provenance, RelationKind};

use super::client::PromptRunner;
use super::kb::{augment_with_kb, KnowledgeBase};
use super::ops::{extract_exact_intents, select_related_intents, ExtractionRecord};
use super::ExtractError;

/// A subject (user or item node) together with the text it is described by.
#[derive(Debug, Clone)]
pub struct SubjectText {
    pub node: NodeId,
    pub text: String,
}

/// Aggregate tallies for one extraction run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionReport {
    pub subjects: usize,
    /// Exact-intent labels accepted across all subjects (pre-merge).
    pub exact_labels: usize,
    /// Related-intent labels accepted across all subjects (pre-merge).
    pub related_labels: usize,
    /// Size of the round-1 vocabulary the retrieval index was built over.
    pub vocabulary: usize,
    pub parse_failures: usize,
    pub hallucinations: usize,
    /// Edges skipped because the triple already existed.
    pub duplicate_edges: usize,
    /// Subjects whose completion call failed, with the failure text.
    pub failed_subjects: Vec<(NodeId, String)>,
}

/// Everything a run produces besides graph mutation.
#[derive(Debug, Clone)]
pub struct ExtractionOutcome {
    pub records: Vec<ExtractionRecord>,
    pub report: ExtractionReport,
}

/// Run both extraction rounds over `subjects` and write the resulting
/// intent nodes and edges into `graph`.
///
/// `k` bounds how many retrieved options round 2 offers each subject
/// (clamped to the vocabulary that remains after excluding the subject's own
/// round-1 labels; subjects with nothing left skip round 2 entirely).
pub fn run_extraction<E: TextEncoder>(
    graph: &mut IntentGraph,
    subjects: &[SubjectText],
    kb: &KnowledgeBase,
    runner: &PromptRunner,
    encoder: E,
    k: usize,
) -> Result<ExtractionOutcome, ExtractError> {
    for s in subjects {
        let node = graph
            .node(s.node)
            .ok_or(GraphError::UnknownNode(s.node))?;
        if node.kind == NodeKind::Intent {
            return Err(ExtractError::InvalidSubject(s.node));
        }
    }

    let mut report = ExtractionReport {
        subjects: subjects.len(),
        ..ExtractionReport::default()
    };

    // round 1: parallel fan-out, order-preserving collect
    let augmented: Vec<String> = subjects
        .iter()
        .map(|s| augment_with_kb(&s.text, kb))
        .collect();
    let round1: Vec<Result<ExtractionRecord, ExtractError>> = subjects
        .par_iter()
        .zip(&augmented)
        .map(|(s, text)| extract_exact_intents(s.node, text, runner))
        .collect();

    let mut records: Vec<ExtractionRecord> = Vec::with_capacity(subjects.len() * 2);
    let mut exact_sets: Vec<BTreeSet<String>> = Vec::with_capacity(subjects.len());
    for (subject, outcome) in subjects.iter().zip(round1) {
        match outcome {
            Ok(record) => {
                if record.parse_failed {
                    report.parse_failures += 1;
                }
                exact_sets.push(record.labels.iter().cloned().collect());
                records.push(record);
            }
            Err(e) => {
                report.failed_subjects.push((subject.node, e.to_string()));
                exact_sets.push(BTreeSet::new());
            }
        }
    }

    // fixed vocabulary for round 2: the union of all round-1 labels
    let vocabulary: Vec<String> = exact_sets
        .iter()
        .flatten()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    report.vocabulary = vocabulary.len();

    let mut round2: Vec<Option<ExtractionRecord>> = vec![None; subjects.len()];
    if !vocabulary.is_empty() && k > 0 {
        let index = build_index(&vocabulary, &encoder)?;
        let queries: Vec<Vec<f64>> = augmented
            .par_iter()
            .map(|text| encoder.encode(text))
            .collect::<Result<_, _>>()?;
        round2 = subjects
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let exclude: HashSet<String> = exact_sets[i].iter().cloned().collect();
                let options: Vec<String> = index
                    .knn(&queries[i], k, &exclude)
                    .into_iter()
                    .map(|(label, _)| label)
                    .collect();
                if options.is_empty() {
                    return Ok(None);
                }
                select_related_intents(s.node, &augmented[i], &options, runner).map(Some)
            })
            .collect::<Vec<Result<Option<ExtractionRecord>, ExtractError>>>()
            .into_iter()
            .zip(subjects)
            .map(|(outcome, subject)| match outcome {
                Ok(record) => record,
                Err(e) => {
                    report.failed_subjects.push((subject.node, e.to_string()));
                    None
                }
            })
            .collect();
    }

    // sequential graph assembly, subject order then label order
    for (i, subject) in subjects.iter().enumerate() {
        let kind = graph.node(subject.node).expect("checked above").kind;
        let relation = match kind {
            NodeKind::User => RelationKind::UserPossessesIntent,
            NodeKind::Item => RelationKind::ItemSatisfiesIntent,
            NodeKind::Intent => unreachable!("intent subjects rejected above"),
        };
        for label in &exact_sets[i] {
            attach(graph, subject.node, label, relation, Provenance::Exact, &mut report)?;
        }
        if let Some(record) = &round2[i] {
            if record.parse_failed {
                report.parse_failures += 1;
            }
            report.hallucinations += record.hallucinations;
            for label in &record.labels {
                attach(graph, subject.node, label, relation, Provenance::Related, &mut report)?;
            }
        }
        report.exact_labels += exact_sets[i].len();
        report.related_labels += round2[i].as_ref().map_or(0, |r| r.labels.len());
    }
    records.extend(round2.into_iter().flatten());

    graph.canonicalize_and_merge();
    Ok(ExtractionOutcome { records, report })
}

fn attach(
    graph: &mut IntentGraph,
    subject: NodeId,
    label: &str,
    relation: RelationKind,
    provenance: Provenance,
    report: &mut ExtractionReport,
) -> Result<(), ExtractError> {
    let intent = graph.intent(label)?;
    match graph.add_edge(subject, intent, relation, provenance) {
        Ok(_) => Ok(()),
        Err(GraphError::DuplicateEdge(..)) => {
            report.duplicate_edges += 1;
            Ok(())
        }
        Err(other) => Err(other.into()),
    }
}
