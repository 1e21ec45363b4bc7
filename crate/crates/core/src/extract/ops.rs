//! Per-subject extraction operations.
//!
//! Each operation issues exactly one templated completion through a
//! [`PromptRunner`] and normalizes the result: labels are canonicalized and
//! de-duplicated, unparseable responses degrade to an empty, flagged record
//! rather than an error, and round-2 picks outside the offered options are
//! dropped and tallied.

use std::collections::BTreeSet;

use crate::graph::NodeId;
use crate::label;

use super::client::PromptRunner;
use super::parse::{parse_label_list, render_label_list};
use super::prompt::{EXPAND_ITEM, EXTRACT_EXACT, SELECT_RELATED};
use super::ExtractError;

/// Which round produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionRound {
    Exact,
    Related,
}

/// Outcome of one extraction call for one subject.
#[derive(Debug, Clone)]
pub struct ExtractionRecord {
    pub subject: NodeId,
    pub round: ExtractionRound,
    /// Canonical, de-duplicated labels, in response order.
    pub labels: Vec<String>,
    pub raw_response: String,
    pub prompt_hash: String,
    /// Set when the response held no parseable list; `labels` is then empty.
    pub parse_failed: bool,
    /// Round-2 picks that were not among the offered options.
    pub hallucinations: usize,
}

/// Expand a bare item name into a one-paragraph description for use as the
/// item's extraction text. Cached like any other completion.
pub fn expand_item_summary(item_name: &str, runner: &PromptRunner) -> Result<String, ExtractError> {
    if item_name.trim().is_empty() {
        return Err(ExtractError::EmptyItemName);
    }
    let (response, _) = runner.run(&EXPAND_ITEM, &[("item_name", item_name)])?;
    if response.trim().is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    Ok(response)
}

/// Round 1: extract intents stated directly in the description.
pub fn extract_exact_intents(
    subject: NodeId,
    desc: &str,
    runner: &PromptRunner,
) -> Result<ExtractionRecord, ExtractError> {
    if desc.trim().is_empty() {
        return Err(ExtractError::EmptyDescription);
    }
    let (response, prompt_hash) = runner.run(&EXTRACT_EXACT, &[("desc", desc)])?;
    let (labels, parse_failed) = match parse_label_list(&response) {
        Ok(raw) => (label::canonicalize_all(raw), false),
        Err(_) => (Vec::new(), true),
    };
    Ok(ExtractionRecord {
        subject,
        round: ExtractionRound::Exact,
        labels,
        raw_response: response,
        prompt_hash,
        parse_failed,
        hallucinations: 0,
    })
}

/// Round 2: offer retrieved candidate intents and keep the model's picks
/// that are actually among them.
pub fn select_related_intents(
    subject: NodeId,
    desc: &str,
    options: &[String],
    runner: &PromptRunner,
) -> Result<ExtractionRecord, ExtractError> {
    if options.is_empty() {
        return Err(ExtractError::EmptyOptions);
    }
    let rendered = render_label_list(options);
    let (response, prompt_hash) = runner.run(
        &SELECT_RELATED,
        &[("desc", desc), ("RAG_options", rendered.as_str())],
    )?;
    let offered: BTreeSet<String> = options.iter().map(|o| label::canonical(o)).collect();
    let (labels, parse_failed, hallucinations) = match parse_label_list(&response) {
        Ok(raw) => {
            let canonical = label::canonicalize_all(raw);
            let mut kept = Vec::new();
            let mut dropped = 0usize;
            for l in canonical {
                if offered.contains(&l) {
                    kept.push(l);
                } else {
                    dropped += 1;
                }
            }
            (kept, false, dropped)
        }
        Err(_) => (Vec::new(), true, 0),
    };
    Ok(ExtractionRecord {
        subject,
        round: ExtractionRound::Related,
        labels,
        raw_response: response,
        prompt_hash,
        parse_failed,
        hallucinations,
    })
}
