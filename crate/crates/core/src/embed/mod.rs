//! Text encoding and exact nearest-neighbor retrieval.
//!
//! The intent vocabulary produced by round-1 extraction is embedded once and
//! searched with a brute-force cosine scan. Vocabularies stay small enough
//! (well under a million labels) that a flat scan with parallel scoring is
//! both fast and exactly correct — no approximate index to tune or audit.
//!
//! Encoders implement [`TextEncoder`]; the default offline encoder is
//! [`HashEncoder`], a deterministic hash-projection embedding that gives
//! texts sharing tokens a higher cosine. [`HttpTextEncoder`] talks to a real
//! embedding endpoint with the same shape of wire contract as the completion
//! client.

mod encoder;
mod index;

pub use encoder::{CachingEncoder, CountingEncoder, HashEncoder, HttpTextEncoder, TextEncoder};
pub use index::{build_index, VectorIndex};

/// Errors raised by encoding or retrieval.
#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("encoder failure: {0}")]
    EncoderFailure(String),
    #[error("encoder returned a non-finite or zero vector for {text:?}")]
    BadVector { text: String },
    #[error("duplicate label {0:?} in index input")]
    DuplicateLabel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("format violation at line {line}: {message}")]
    FormatViolation { line: usize, message: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// ‖v‖₂.
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalize in place; returns false when the norm is zero or non-finite.
pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}
