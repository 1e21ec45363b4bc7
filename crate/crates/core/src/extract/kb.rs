//! Knowledge-base grounding for domain terminology.
//!
//! A knowledge base is an ordered list of terminology → explanation pairs.
//! Before a description is sent for extraction, every key that occurs in it
//! as a whole token (or whole token sequence) gets its explanation appended
//! under a `### Concept Explanation` section, so the model sees what the
//! jargon means instead of guessing.

use std::io::{BufRead, BufReader};
use std::path::Path;

use super::ExtractError;

/// Ordered terminology → explanation pairs with case-insensitive,
/// whole-token lookup.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entries: Vec<(String, String)>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add an entry. Keys must be non-empty and must not collide with an
    /// existing key up to case.
    pub fn insert(
        &mut self,
        key: impl Into<String>,
        explanation: impl Into<String>,
    ) -> Result<(), ExtractError> {
        let key = key.into();
        if tokens(&key).is_empty() {
            return Err(ExtractError::KbFormat {
                line: 0,
                message: "key has no tokens".to_string(),
            });
        }
        let folded = key.to_lowercase();
        if self.entries.iter().any(|(k, _)| k.to_lowercase() == folded) {
            return Err(ExtractError::KbFormat {
                line: 0,
                message: format!("duplicate key {key:?}"),
            });
        }
        self.entries.push((key, explanation.into()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Entries whose key occurs in `text` as a whole-token sequence,
    /// case-insensitively, in knowledge-base order.
    pub fn matches<'a>(&'a self, text: &str) -> Vec<&'a (String, String)> {
        let text_tokens = tokens(text);
        self.entries
            .iter()
            .filter(|(key, _)| contains_seq(&text_tokens, &tokens(key)))
            .collect()
    }

    /// Load from a two-column tab-separated file: `key\texplanation` per
    /// line. Blank lines are skipped.
    pub fn from_tsv_path(path: &Path) -> Result<Self, ExtractError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(source: R) -> Result<Self, ExtractError> {
        let mut kb = Self::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, explanation) = line.split_once('\t').ok_or(ExtractError::KbFormat {
                line: lineno,
                message: "expected key\\texplanation".to_string(),
            })?;
            kb.insert(key, explanation).map_err(|e| match e {
                ExtractError::KbFormat { message, .. } => {
                    ExtractError::KbFormat { line: lineno, message }
                }
                other => other,
            })?;
        }
        Ok(kb)
    }
}

/// Append explanations for every knowledge-base key found in `text`.
///
/// Output always starts with `text` verbatim; when nothing matches it is
/// returned unchanged, with no empty section.
pub fn augment_with_kb(text: &str, kb: &KnowledgeBase) -> String {
    let hits = kb.matches(text);
    if hits.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len() + 64 * hits.len());
    out.push_str(text);
    out.push_str("\n### Concept Explanation\n");
    for (idx, (key, explanation)) in hits.iter().enumerate() {
        if idx > 0 {
            out.push('\n');
        }
        out.push_str(key);
        out.push_str(": ");
        out.push_str(explanation);
    }
    out
}

/// Lowercased maximal runs of alphanumerics and underscores. The underscore
/// is part of a token so a key like `API` cannot match inside `NYC_API`, and
/// compound acronym keys match as themselves.
pub(crate) fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn contains_seq(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
