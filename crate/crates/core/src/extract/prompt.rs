//! Versioned prompt templates with named slots.
//!
//! Each template lives in its own file under `templates/` and declares the
//! slots it expects. The wording — including its quirks — is pinned by golden
//! tests because downstream behavior (and every cache key) depends on the
//! exact bytes. Changing a template means bumping its version so stale cache
//! entries can be identified and collected.

use super::ExtractError;

/// A named, versioned prompt body with `{slot}` placeholders.
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: &'static str,
    pub slots: &'static [&'static str],
    pub body: &'static str,
}

/// Round-1 template: extract intent entities from a subject's description.
pub const EXTRACT_EXACT: PromptTemplate = PromptTemplate {
    name: "extract_exact",
    version: "v1",
    slots: &["desc"],
    body: include_str!("templates/extract_exact.v1.txt"),
};

/// Round-2 template: pick related intents from a fixed option list.
pub const SELECT_RELATED: PromptTemplate = PromptTemplate {
    name: "select_related",
    version: "v1",
    slots: &["desc", "RAG_options"],
    body: include_str!("templates/select_related.v1.txt"),
};

/// Expansion template: turn a bare item name into a paragraph description.
pub const EXPAND_ITEM: PromptTemplate = PromptTemplate {
    name: "expand_item",
    version: "v1",
    slots: &["item_name"],
    body: include_str!("templates/expand_item.v1.txt"),
};

/// Every template the pipeline can issue, for manifests and cache collection.
pub const ALL_TEMPLATES: &[&PromptTemplate] = &[&EXTRACT_EXACT, &SELECT_RELATED, &EXPAND_ITEM];

impl PromptTemplate {
    /// Substitute every declared slot. Slot values are inserted verbatim and
    /// never re-scanned, so braces inside a description cannot smuggle in a
    /// second substitution. All declared slots must be provided; providing an
    /// undeclared one is an error.
    pub fn fill(&self, values: &[(&str, &str)]) -> Result<String, ExtractError> {
        for (key, _) in values {
            if !self.slots.contains(key) {
                return Err(ExtractError::UnknownSlot {
                    template: self.name,
                    slot: key.to_string(),
                });
            }
        }
        for slot in self.slots {
            if !values.iter().any(|(k, _)| k == slot) {
                return Err(ExtractError::MissingSlot {
                    template: self.name,
                    slot,
                });
            }
        }
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body;
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let after = &rest[start + 1..];
            match after.find('}') {
                Some(end) => {
                    let name = &after[..end];
                    if let Some((_, value)) = values.iter().find(|(k, _)| *k == name) {
                        out.push_str(value);
                    } else {
                        // literal braces that are not a slot pass through
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                    rest = &after[end + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}
