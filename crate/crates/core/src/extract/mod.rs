//! Two-round grounded intent extraction.
//!
//! Round 1 asks a completion model to pull intent entities straight out of a
//! subject's own text ("exact" intents). The union of everything found in
//! round 1 becomes a fixed vocabulary; round 2 then offers each subject the
//! most similar entries from that vocabulary (minus its own) and asks the
//! model to pick the ones a user of that subject would also care about
//! ("related" intents). Every response is requested as a python-style list
//! of strings and parsed defensively; picks outside the offered options are
//! dropped and tallied rather than trusted.
//!
//! The prompt wording lives in versioned template files and is pinned by
//! golden tests — it is part of the method, not presentation. All model
//! traffic flows through [`PromptRunner`], which adds content-addressed
//! response caching so a re-run with a warm cache makes zero client calls.

mod client;
mod kb;
mod ops;
mod parse;
mod prompt;
mod run;

pub use client::{
    CompletionClient, CountingClient, DecodeSettings, FnCompletionClient, HttpCompletionClient,
    MockCompletionClient, PromptRunner, ResponseCache,
};
pub use kb::{augment_with_kb, KnowledgeBase};
pub(crate) use kb::tokens as kb_tokens;
pub use ops::{
    expand_item_summary, extract_exact_intents, select_related_intents, ExtractionRecord,
    ExtractionRound,
};
pub use parse::{parse_label_list, render_label_list};
pub use prompt::{PromptTemplate, ALL_TEMPLATES, EXPAND_ITEM, EXTRACT_EXACT, SELECT_RELATED};
pub use run::{run_extraction, ExtractionOutcome, ExtractionReport, SubjectText};

use crate::graph::NodeId;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("completion request failed: {0}")]
    ClientFailure(String),
    #[error("completion response was empty")]
    EmptyResponse,
    #[error("no parseable list of strings in response: {snippet:?}")]
    ParseFailure { snippet: String },
    #[error("template {template} does not declare slot {{{slot}}}")]
    UnknownSlot { template: &'static str, slot: String },
    #[error("slot {{{slot}}} of template {template} was not provided")]
    MissingSlot {
        template: &'static str,
        slot: &'static str,
    },
    #[error("item name is empty")]
    EmptyItemName,
    #[error("description is empty")]
    EmptyDescription,
    #[error("round-2 option list is empty")]
    EmptyOptions,
    #[error("knowledge base line {line}: {message}")]
    KbFormat { line: usize, message: String },
    #[error("subject {0} is not a user or item node")]
    InvalidSubject(NodeId),
    #[error(transparent)]
    Encoder(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
