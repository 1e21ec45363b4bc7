//! Canonical intent labels.
//!
//! Intent strings coming out of an LLM carry stray whitespace and arbitrary
//! casing. Everywhere the engine compares, merges, or indexes intents it uses
//! the canonical form produced here: trimmed, Unicode-lowercased.

/// Canonical form of an intent label: trim, then Unicode-aware lowercase.
pub fn canonical(label: &str) -> String {
    label.trim().to_lowercase()
}

/// True if the label is empty after canonicalization.
pub fn is_blank(label: &str) -> bool {
    label.trim().is_empty()
}

/// Canonicalize a batch of raw labels, dropping blanks and duplicates while
/// preserving first-occurrence order.
pub fn canonicalize_all<I, S>(raw: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for r in raw {
        let c = canonical(r.as_ref());
        if c.is_empty() {
            continue;
        }
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}
