//! Text encoders: deterministic hash projection, HTTP-backed, and wrappers.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{normalize, EmbedError};

/// Deterministic text → vector mapping.
pub trait TextEncoder: Send + Sync {
    /// Output dimension; every vector this encoder returns has this length.
    fn dimension(&self) -> usize;

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError>;

    /// Batched encoding; the default loops over [`TextEncoder::encode`],
    /// endpoint-backed encoders override it with one request per batch.
    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

impl<E: TextEncoder + ?Sized> TextEncoder for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        (**self).encode(text)
    }
    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        (**self).encode_batch(texts)
    }
}

// ---------------------------------------------------------------------------
// hash-projection encoder
// ---------------------------------------------------------------------------

/// Deterministic offline encoder.
///
/// Each lowercased alphanumeric token is hashed into a pseudo-random unit
/// vector; a text's embedding is the normalized sum of its token vectors.
/// Texts sharing tokens therefore land closer in cosine than unrelated
/// texts, and identical texts map to identical vectors — enough structure
/// for retrieval and feature seeding without any model weights.
#[derive(Debug, Clone, Copy)]
pub struct HashEncoder {
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        Self { dim }
    }
}

impl Default for HashEncoder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl TextEncoder for HashEncoder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut tokens = crate::extract::kb_tokens(text);
        if tokens.is_empty() {
            // blank or symbol-only text still deserves a stable vector
            tokens.push(format!("\u{0}raw:{text}"));
        }
        let mut sum = vec![0.0; self.dim];
        for token in &tokens {
            accumulate_token(&mut sum, token);
        }
        if !normalize(&mut sum) {
            // cancellation to exactly zero is not reachable with one token;
            // guard anyway so the invariant is local
            sum = vec![0.0; self.dim];
            accumulate_token(&mut sum, &format!("\u{0}salt:{}", tokens.len()));
            normalize(&mut sum);
        }
        Ok(sum)
    }
}

/// Add the token's pseudo-random unit vector onto `sum`. Coordinates come
/// from successive SHA-256 blocks of `token \0 counter`, mapped uniformly
/// into [-1, 1).
fn accumulate_token(sum: &mut [f64], token: &str) {
    let dim = sum.len();
    let mut coords = Vec::with_capacity(dim);
    let mut block = 0u32;
    'outer: loop {
        let mut hasher = Sha256::new();
        hasher.update(token.as_bytes());
        hasher.update([0u8]);
        hasher.update(block.to_le_bytes());
        let digest = hasher.finalize();
        for chunk in digest.chunks_exact(8) {
            let bits = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            // 53 high bits → [0,1) → [-1,1)
            let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
            coords.push(2.0 * unit - 1.0);
            if coords.len() == dim {
                break 'outer;
            }
        }
        block += 1;
    }
    normalize(&mut coords);
    for (s, c) in sum.iter_mut().zip(&coords) {
        *s += c;
    }
}

// ---------------------------------------------------------------------------
// HTTP encoder
// ---------------------------------------------------------------------------

/// Encoder backed by a remote embedding endpoint.
///
/// Wire contract: JSON POST `{"texts": [...]}` answered with
/// `{"vectors": [[...], ...]}`, bearer token read from an environment
/// variable at request time. Transport errors, 408/429, and 5xx are retried
/// with exponential backoff.
pub struct HttpTextEncoder {
    endpoint: String,
    token_env: String,
    dim: usize,
    http: reqwest::blocking::Client,
    max_retries: u32,
    initial_backoff: Duration,
}

impl HttpTextEncoder {
    pub fn new(
        endpoint: impl Into<String>,
        token_env: impl Into<String>,
        dim: usize,
    ) -> Result<Self, EmbedError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| EmbedError::EncoderFailure(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token_env: token_env.into(),
            dim,
            http,
            max_retries: 3,
            initial_backoff: Duration::from_millis(200),
        })
    }

    pub fn with_retry(mut self, max_retries: u32, initial_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.initial_backoff = initial_backoff;
        self
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let token = std::env::var(&self.token_env).map_err(|_| {
            EmbedError::EncoderFailure(format!(
                "environment variable {} is not set",
                self.token_env
            ))
        })?;
        let body = serde_json::json!({ "texts": texts });
        let mut delay = self.initial_backoff;
        let mut last_error = String::from("no attempt made");
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self
                .http
                .post(&self.endpoint)
                .bearer_auth(&token)
                .json(&body)
                .send()
            {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let value: serde_json::Value = resp.json().map_err(|e| {
                            EmbedError::EncoderFailure(format!("bad response body: {e}"))
                        })?;
                        return parse_vectors(&value, texts.len(), self.dim);
                    }
                    let retryable = status.is_server_error()
                        || status == reqwest::StatusCode::REQUEST_TIMEOUT
                        || status == reqwest::StatusCode::TOO_MANY_REQUESTS;
                    last_error = format!("endpoint returned {status}");
                    if !retryable {
                        return Err(EmbedError::EncoderFailure(last_error));
                    }
                }
                Err(e) => last_error = format!("transport failure: {e}"),
            }
        }
        Err(EmbedError::EncoderFailure(format!(
            "{last_error} (after {} attempts)",
            self.max_retries + 1
        )))
    }
}

fn parse_vectors(
    value: &serde_json::Value,
    expected_count: usize,
    dim: usize,
) -> Result<Vec<Vec<f64>>, EmbedError> {
    let rows = value
        .get("vectors")
        .and_then(|v| v.as_array())
        .ok_or_else(|| EmbedError::EncoderFailure("response missing vectors".to_string()))?;
    if rows.len() != expected_count {
        return Err(EmbedError::EncoderFailure(format!(
            "expected {expected_count} vectors, got {}",
            rows.len()
        )));
    }
    rows.iter()
        .map(|row| {
            let coords: Option<Vec<f64>> = row
                .as_array()
                .map(|xs| xs.iter().filter_map(serde_json::Value::as_f64).collect());
            match coords {
                Some(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Ok(v),
                Some(v) => Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                }),
                None => Err(EmbedError::EncoderFailure("malformed vector row".to_string())),
            }
        })
        .collect()
}

impl TextEncoder for HttpTextEncoder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.request(&[text])?.remove(0))
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        self.request(texts)
    }
}

// ---------------------------------------------------------------------------
// wrappers
// ---------------------------------------------------------------------------

/// Counts texts that reach the wrapped encoder (batch calls count each text).
pub struct CountingEncoder<E> {
    inner: E,
    encoded: AtomicU64,
}

impl<E> CountingEncoder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            encoded: AtomicU64::new(0),
        }
    }

    pub fn encoded(&self) -> u64 {
        self.encoded.load(Ordering::Relaxed)
    }
}

impl<E: TextEncoder> TextEncoder for CountingEncoder<E> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        self.encoded.fetch_add(1, Ordering::Relaxed);
        self.inner.encode(text)
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        self.encoded.fetch_add(texts.len() as u64, Ordering::Relaxed);
        self.inner.encode_batch(texts)
    }
}

/// Disk-backed encode cache: one file per text hash, named
/// `embed.d{dim}.{sha256}.txt`, holding comma-separated coordinates. With a
/// warm cache a re-run reaches the wrapped encoder zero times.
pub struct CachingEncoder<E> {
    inner: E,
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, Vec<f64>>>,
}

impl<E: TextEncoder> CachingEncoder<E> {
    pub fn in_memory(inner: E) -> Self {
        Self {
            inner,
            dir: None,
            mem: Mutex::new(HashMap::new()),
        }
    }

    pub fn at_dir(inner: E, dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            inner,
            dir: Some(dir.to_path_buf()),
            mem: Mutex::new(HashMap::new()),
        })
    }

    fn file_name(&self, text: &str) -> String {
        let digest = Sha256::digest(text.as_bytes());
        format!("embed.d{}.{:x}.txt", self.inner.dimension(), digest)
    }

    fn lookup(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(hit) = self.mem.lock().expect("cache lock").get(name) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let raw = std::fs::read_to_string(dir.join(name)).ok()?;
        let coords: Option<Vec<f64>> = raw
            .trim_end()
            .split(',')
            .map(|t| t.parse::<f64>().ok())
            .collect();
        let coords = coords?;
        if coords.len() != self.inner.dimension() {
            return None;
        }
        self.mem
            .lock()
            .expect("cache lock")
            .insert(name.to_string(), coords.clone());
        Some(coords)
    }

    fn store(&self, name: &str, coords: &[f64]) -> Result<(), EmbedError> {
        if let Some(dir) = &self.dir {
            let line = coords
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let tmp = dir.join(format!("{name}.tmp{}", std::process::id()));
            std::fs::write(&tmp, line)?;
            std::fs::rename(&tmp, dir.join(name))?;
        }
        self.mem
            .lock()
            .expect("cache lock")
            .insert(name.to_string(), coords.to_vec());
        Ok(())
    }
}

impl<E: TextEncoder> TextEncoder for CachingEncoder<E> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let name = self.file_name(text);
        if let Some(hit) = self.lookup(&name) {
            return Ok(hit);
        }
        let coords = self.inner.encode(text)?;
        self.store(&name, &coords)?;
        Ok(coords)
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let names: Vec<String> = texts.iter().map(|t| self.file_name(t)).collect();
        let mut out: Vec<Option<Vec<f64>>> = names.iter().map(|n| self.lookup(n)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.encode_batch(&batch)?;
            for (&i, coords) in missing.iter().zip(fresh) {
                self.store(&names[i], &coords)?;
                out[i] = Some(coords);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
