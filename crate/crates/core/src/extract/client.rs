//! Completion clients, response caching, and the prompt runner.
//!
//! Everything that talks to a completion model goes through the
//! [`CompletionClient`] trait. Production traffic uses
//! [`HttpCompletionClient`]; tests and offline runs use the deterministic
//! [`MockCompletionClient`]. The [`PromptRunner`] couples a client with a
//! content-addressed [`ResponseCache`] so identical prompts are answered
//! from disk and a fully warmed cache needs zero client calls.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::parse::{parse_label_list, render_label_list};
use super::prompt::PromptTemplate;
use super::ExtractError;

/// Decoding knobs carried with every completion request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeSettings {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

/// Text-in, text-out completion backend.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str, settings: &DecodeSettings) -> Result<String, ExtractError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for &C {
    fn complete(&self, prompt: &str, settings: &DecodeSettings) -> Result<String, ExtractError> {
        (**self).complete(prompt, settings)
    }
}

/// Adapter turning a closure into a client; handy in tests for scripting
/// specific responses (hallucinations, garbage, failures).
pub struct FnCompletionClient<F>(pub F)
where
    F: Fn(&str) -> Result<String, ExtractError> + Send + Sync;

impl<F> CompletionClient for FnCompletionClient<F>
where
    F: Fn(&str) -> Result<String, ExtractError> + Send + Sync,
{
    fn complete(&self, prompt: &str, _settings: &DecodeSettings) -> Result<String, ExtractError> {
        (self.0)(prompt)
    }
}

/// Counts calls that reach the wrapped client. Cache-covered prompts never
/// arrive here, which is exactly what the offline-run assertions check.
pub struct CountingClient<C> {
    inner: C,
    calls: AtomicU64,
}

impl<C> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<C: CompletionClient> CompletionClient for CountingClient<C> {
    fn complete(&self, prompt: &str, settings: &DecodeSettings) -> Result<String, ExtractError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(prompt, settings)
    }
}

// ---------------------------------------------------------------------------
// deterministic mock
// ---------------------------------------------------------------------------

/// Deterministic offline stand-in for a completion model.
///
/// Responses are a pure function of the prompt text:
/// - expansion prompts are answered with a fixed paragraph chosen by a hash
///   of the item name (a few well-known names are canned);
/// - round-1 extraction returns the double-quoted phrases and ALL-CAPS
///   tokens found in the description section, in order of appearance;
/// - round-2 selection returns every offered option that shares a token of
///   length ≥ 3 with the description section.
///
/// The rules are crude on purpose: they are legible, they reward planting
/// phrases in fixture text, and they make the whole pipeline runnable with
/// byte-identical output and no network.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockCompletionClient;

impl CompletionClient for MockCompletionClient {
    fn complete(&self, prompt: &str, _settings: &DecodeSettings) -> Result<String, ExtractError> {
        Ok(mock_response(prompt))
    }
}

const EXPANSION_MARKER: &str = " is a game on Steam. Collect necessary information";

fn mock_response(prompt: &str) -> String {
    if let Some(pos) = prompt.find(EXPANSION_MARKER) {
        return expansion_paragraph(&prompt[..pos]);
    }
    if prompt.contains("### Available Options:") {
        return related_response(prompt);
    }
    if prompt.contains("### Dataset Description:") {
        return exact_response(prompt);
    }
    "[]".to_string()
}

/// Phrase bank the hash fallback draws quoted pseudo-intents from.
const EXPANSION_PHRASES: &[&str] = &[
    "resource management",
    "tactical depth",
    "cooperative play",
    "environmental puzzles",
    "base building",
    "roguelike progression",
    "atmospheric exploration",
    "competitive ladders",
    "crafting systems",
    "speedrun potential",
    "emergent sandbox stories",
    "turn-based encounters",
];

fn expansion_paragraph(item_name: &str) -> String {
    if item_name == "Half-Life 2" {
        return concat!(
            "Half-Life 2 is a landmark first-person shooter praised for its ",
            "\"storytelling\", its physics-driven \"gravity gun\" mechanics, and ",
            "tightly paced \"combat\". The game pairs \"physics-based gameplay\" ",
            "with an atmospheric world that rewards exploration, and players ",
            "interested in narrative-driven action consistently cite it as a ",
            "reference point."
        )
        .to_string();
    }
    let digest = Sha256::digest(item_name.as_bytes());
    let n = EXPANSION_PHRASES.len();
    let a = digest[0] as usize % n;
    let b = (a + 1 + digest[1] as usize % (n - 1)) % n;
    let mut c = (b + 1 + digest[2] as usize % (n - 1)) % n;
    if c == a {
        c = (c + 1) % n;
    }
    format!(
        "{item_name} is frequently described as a focused experience built around \
\"{p0}\". Reviewers highlight \"{p1}\" as the standout quality, and note that \
fans of \"{p2}\" tend to engage deeply. Overall reception emphasizes \
approachable pacing and durable replay value.",
        p0 = EXPANSION_PHRASES[a],
        p1 = EXPANSION_PHRASES[b],
        p2 = EXPANSION_PHRASES[c],
    )
}

fn section<'a>(prompt: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let begin = prompt.find(start)? + start.len();
    let rest = &prompt[begin..];
    let stop = rest.find(end)?;
    Some(&rest[..stop])
}

fn exact_response(prompt: &str) -> String {
    let Some(desc) = section(prompt, "### Dataset Description:\n", "\n### Answer:") else {
        return "[]".to_string();
    };
    // gather (position, surface) for quoted phrases and ALL-CAPS tokens
    let mut found: Vec<(usize, String)> = Vec::new();
    let bytes = desc.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'"' {
            if let Some(len) = desc[i + 1..].find('"') {
                let phrase = &desc[i + 1..i + 1 + len];
                if !phrase.trim().is_empty() && !phrase.contains('\n') {
                    found.push((i, phrase.trim().to_string()));
                }
                i += len + 2;
                continue;
            }
        }
        i += 1;
    }
    let mut offset = 0;
    for raw in desc.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        let pos = offset;
        offset += raw.len() + 1;
        let alpha: Vec<char> = raw.chars().filter(|c| c.is_alphabetic()).collect();
        if alpha.len() >= 2 && alpha.iter().all(|c| c.is_uppercase()) {
            found.push((pos, raw.to_string()));
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let mut seen = std::collections::HashSet::new();
    let labels: Vec<String> = found
        .into_iter()
        .filter(|(_, s)| seen.insert(s.to_lowercase()))
        .map(|(_, s)| s)
        .collect();
    render_label_list(&labels)
}

fn related_response(prompt: &str) -> String {
    let Some(desc) = section(prompt, "### Dataset Description:\n", "\n### Available Options:")
    else {
        return "[]".to_string();
    };
    let Some(options_text) = section(prompt, "### Available Options:\n", "\n### Important Notes:")
    else {
        return "[]".to_string();
    };
    let Ok(options) = parse_label_list(options_text) else {
        return "[]".to_string();
    };
    let desc_tokens: std::collections::HashSet<String> = super::kb::tokens(desc)
        .into_iter()
        .filter(|t| t.chars().count() >= 3)
        .collect();
    let picked: Vec<String> = options
        .into_iter()
        .filter(|opt| {
            super::kb::tokens(opt)
                .iter()
                .any(|t| t.chars().count() >= 3 && desc_tokens.contains(t))
        })
        .collect();
    render_label_list(&picked)
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

/// Completion client for a remote endpoint.
///
/// The wire contract is a single JSON POST:
/// request `{"prompt", "temperature", "max_tokens"}`, response `{"text"}`,
/// authenticated with a bearer token read from an environment variable at
/// request time (never stored in config files). Transport errors, 408/429,
/// and 5xx responses are retried with exponential backoff; other failures
/// surface immediately.
pub struct HttpCompletionClient {
    endpoint: String,
    token_env: String,
    http: reqwest::blocking::Client,
    max_retries: u32,
    initial_backoff: Duration,
}

impl HttpCompletionClient {
    pub fn new(
        endpoint: impl Into<String>,
        token_env: impl Into<String>,
    ) -> Result<Self, ExtractError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ExtractError::ClientFailure(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token_env: token_env.into(),
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

    fn bearer_token(&self) -> Result<String, ExtractError> {
        std::env::var(&self.token_env).map_err(|_| {
            ExtractError::ClientFailure(format!(
                "environment variable {} is not set",
                self.token_env
            ))
        })
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str, settings: &DecodeSettings) -> Result<String, ExtractError> {
        let token = self.bearer_token()?;
        let body = serde_json::json!({
            "prompt": prompt,
            "temperature": settings.temperature,
            "max_tokens": settings.max_tokens,
        });
        let mut delay = self.initial_backoff;
        let mut last_error = String::from("no attempt made");
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            let sent = self
                .http
                .post(&self.endpoint)
                .bearer_auth(&token)
                .json(&body)
                .send();
            match sent {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let value: serde_json::Value = resp.json().map_err(|e| {
                            ExtractError::ClientFailure(format!("bad response body: {e}"))
                        })?;
                        return value
                            .get("text")
                            .and_then(|t| t.as_str())
                            .map(str::to_string)
                            .ok_or_else(|| {
                                ExtractError::ClientFailure(
                                    "response is missing the text field".to_string(),
                                )
                            });
                    }
                    let retryable = status.is_server_error()
                        || status == reqwest::StatusCode::REQUEST_TIMEOUT
                        || status == reqwest::StatusCode::TOO_MANY_REQUESTS;
                    last_error = format!("endpoint returned {status}");
                    if !retryable {
                        return Err(ExtractError::ClientFailure(last_error));
                    }
                }
                Err(e) => last_error = format!("transport failure: {e}"),
            }
        }
        Err(ExtractError::ClientFailure(format!(
            "{last_error} (after {} attempts)",
            self.max_retries + 1
        )))
    }
}

// ---------------------------------------------------------------------------
// response cache + runner
// ---------------------------------------------------------------------------

/// Content-addressed completion cache: one file per prompt hash, named
/// `{template}.{version}.{sha256}.txt` so entries for retired template
/// versions can be identified and collected without opening them.
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    /// Purely in-memory cache (tests, one-shot runs).
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            mem: Mutex::new(HashMap::new()),
        }
    }

    /// Disk-backed cache rooted at `dir`, created if absent.
    pub fn at_dir(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            mem: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn file_name(template: &PromptTemplate, hash: &str) -> String {
        format!("{}.{}.{}.txt", template.name, template.version, hash)
    }

    fn get(&self, template: &PromptTemplate, hash: &str) -> Option<String> {
        let name = Self::file_name(template, hash);
        if let Some(hit) = self.mem.lock().expect("cache lock").get(&name) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let text = std::fs::read_to_string(dir.join(&name)).ok()?;
        self.mem
            .lock()
            .expect("cache lock")
            .insert(name, text.clone());
        Some(text)
    }

    fn put(
        &self,
        template: &PromptTemplate,
        hash: &str,
        response: &str,
    ) -> Result<(), ExtractError> {
        let name = Self::file_name(template, hash);
        if let Some(dir) = &self.dir {
            // write-then-rename so concurrent writers of the same key are safe
            let tmp = dir.join(format!("{name}.tmp{}", std::process::id()));
            std::fs::write(&tmp, response)?;
            std::fs::rename(&tmp, dir.join(&name))?;
        }
        self.mem
            .lock()
            .expect("cache lock")
            .insert(name, response.to_string());
        Ok(())
    }
}

/// Hash that keys the cache: template identity, decode settings, and the
/// filled prompt.
pub(crate) fn prompt_hash(
    template: &PromptTemplate,
    settings: &DecodeSettings,
    prompt: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template.name.as_bytes());
    hasher.update(b"\n");
    hasher.update(template.version.as_bytes());
    hasher.update(b"\n");
    hasher.update(format!("{}\n{}\n", settings.temperature, settings.max_tokens));
    hasher.update(prompt.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// A completion client paired with a response cache and fixed decode
/// settings; the single entry point the extraction operations use.
pub struct PromptRunner<'a> {
    pub client: &'a dyn CompletionClient,
    pub cache: &'a ResponseCache,
    pub settings: DecodeSettings,
}

impl<'a> PromptRunner<'a> {
    pub fn new(client: &'a dyn CompletionClient, cache: &'a ResponseCache) -> Self {
        Self {
            client,
            cache,
            settings: DecodeSettings::default(),
        }
    }

    /// Fill `template`, answer from cache when possible, otherwise call the
    /// client and persist the response. Returns the response text and the
    /// prompt hash that keyed it.
    pub fn run(
        &self,
        template: &PromptTemplate,
        values: &[(&str, &str)],
    ) -> Result<(String, String), ExtractError> {
        let prompt = template.fill(values)?;
        let hash = prompt_hash(template, &self.settings, &prompt);
        if let Some(hit) = self.cache.get(template, &hash) {
            return Ok((hit, hash));
        }
        let response = self.client.complete(&prompt, &self.settings)?;
        self.cache.put(template, &hash, &response)?;
        Ok((response, hash))
    }
}
