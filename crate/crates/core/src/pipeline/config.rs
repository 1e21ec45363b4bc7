//! Flat `key = value` run configuration with environment-variable
//! interpolation.
//!
//! No nested config language: one key per line, `#` comments, `${VAR}`
//! expansion for secrets and machine-local paths. Relative paths are
//! resolved against the config file's own directory so a config can travel
//! with its dataset. Endpoint bearer tokens are never written into the
//! file — only the *names* of the environment variables holding them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::eval::SplitSpec;
use crate::model::{Activation, ModelVariant, TrainConfig};
use crate::score::ScoreConfig;

use super::PipelineError;

/// Default environment variable consulted for the completion bearer token.
pub const COMPLETION_TOKEN_ENV: &str = "INTENTREC_COMPLETION_TOKEN";
/// Default environment variable consulted for the encoder bearer token.
pub const ENCODER_TOKEN_ENV: &str = "INTENTREC_ENCODER_TOKEN";

/// A fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Interaction TSV: `user_id`, `item_id`, optional `timestamp`.
    pub interactions: PathBuf,
    /// Item metadata, TSV or per-line JSON records.
    pub items: PathBuf,
    /// Optional user-profile TSV: `user_id`, `profile`.
    pub users: Option<PathBuf>,
    /// Optional terminology knowledge base: `term<TAB>explanation`.
    pub kb: Option<PathBuf>,
    /// Completion endpoint URL; absent means the run must use the offline
    /// mock backend.
    pub completion_endpoint: Option<String>,
    /// Encoder endpoint URL; absent means the hash encoder is used.
    pub encoder_endpoint: Option<String>,
    /// Environment variable holding the completion bearer token.
    pub completion_token_env: String,
    /// Environment variable holding the encoder bearer token.
    pub encoder_token_env: String,
    /// How many retrieved candidate intents round 2 offers each subject.
    pub retrieval_k: usize,
    /// Dimension of the text-embedding space used for candidate retrieval.
    pub encoder_dim: usize,
    /// Final-score mixing weights.
    pub score: ScoreConfig,
    /// Interaction split ratios, negative budget, and the shared seed.
    pub split: SplitSpec,
    /// Both endpoints of a test interaction must have at most this many
    /// training interactions to count as cold-start.
    pub cold_start_threshold: usize,
    /// Ranking cutoffs reported by evaluation.
    pub cutoffs: Vec<usize>,
    /// Embedding training settings; its seed equals the root seed.
    pub train: TrainConfig,
    /// Root seed; feeds both the split and the trainer.
    pub seed: u64,
    /// Completion/embedding response caches live here.
    pub cache_dir: PathBuf,
    /// Versioned stage artifacts live here.
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    /// Read and validate the file at `path`.
    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_text(&text, base)
    }

    /// Parse `text`, resolving relative paths against `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let raw = parse_pairs(text)?;
        build(raw, base)
    }

    /// Re-seed the whole run: split and trainer both follow.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Digest of every resolved setting; equal hashes mean two runs were
    /// configured identically (after interpolation and seed overrides).
    pub fn config_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_text().as_bytes());
        hasher.finalize().into()
    }

    /// `config_hash` as lowercase hex, for manifests and file names.
    pub fn config_hash_hex(&self) -> String {
        self.config_hash().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// One sorted `key=value` line per resolved setting.
    fn canonical_text(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let opt = |s: &Option<String>| s.clone().unwrap_or_default();
        let list = |xs: &[usize]| {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let mut lines = vec![
            format!("activation={}", activation_name(self.train.activation)),
            format!("batch_size={}", self.train.batch_size),
            format!("cache_dir={}", self.cache_dir.display()),
            format!("cold_start_threshold={}", self.cold_start_threshold),
            format!("completion_endpoint={}", opt(&self.completion_endpoint)),
            format!("completion_token_env={}", self.completion_token_env),
            format!("conv_layers={}", self.train.conv_layers),
            format!("cutoffs={}", list(&self.cutoffs)),
            format!("dim={}", self.train.dim),
            format!("encoder_dim={}", self.encoder_dim),
            format!("encoder_endpoint={}", opt(&self.encoder_endpoint)),
            format!("encoder_token_env={}", self.encoder_token_env),
            format!("entity_norm_penalty={}", self.train.entity_norm_penalty),
            format!("epochs={}", self.train.epochs),
            format!("eval_negatives={}", self.split.eval_negatives),
            format!("hyperplane_norm_penalty={}", self.train.hyperplane_norm_penalty),
            format!("interactions={}", self.interactions.display()),
            format!("items={}", self.items.display()),
            format!("kb={}", opt_path(&self.kb)),
            format!("lambda={}", self.score.lambda),
            format!("learning_rate={}", self.train.learning_rate),
            format!("negatives_per_positive={}", self.train.negatives_per_positive),
            format!("output_dir={}", self.output_dir.display()),
            format!("overlap_penalty={}", self.score.overlap_penalty),
            format!("retrieval_k={}", self.retrieval_k),
            format!("seed={}", self.seed),
            format!(
                "split_ratios={},{},{}",
                self.split.ratios.0, self.split.ratios.1, self.split.ratios.2
            ),
            format!("users={}", opt_path(&self.users)),
            format!("variant={}", variant_name(self.train.variant)),
            format!("weight_decay={}", self.train.weight_decay),
        ];
        lines.sort();
        lines.join("\n")
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
        Activation::Identity => "identity",
    }
}

fn variant_name(v: ModelVariant) -> &'static str {
    match v {
        ModelVariant::IntentPrior => "intent-prior",
        ModelVariant::VanillaGnn => "vanilla-gnn",
        ModelVariant::VanillaTranslation => "vanilla-translation",
    }
}

/// Split the file into `key → value` pairs: blank lines and `#` comments
/// skipped, duplicates rejected, `${VAR}` interpolated from the
/// environment.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut pairs = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("line {}: expected key=value, got {line:?}", idx + 1))
        })?;
        let key = key.trim().to_string();
        let value = interpolate(value.trim(), idx + 1)?;
        if pairs.insert(key.clone(), value).is_some() {
            return Err(PipelineError::Config(format!(
                "line {}: duplicate key {key:?}",
                idx + 1
            )));
        }
    }
    Ok(pairs)
}

/// Expand each `${NAME}` from the environment; unset variables are errors
/// rather than silently empty.
fn interpolate(value: &str, line: usize) -> Result<String, PipelineError> {
    let mut out = String::with_capacity(value.len());
    let mut rest = value;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 2..];
        let end = tail.find('}').ok_or_else(|| {
            PipelineError::Config(format!("line {line}: unterminated ${{...}} in {value:?}"))
        })?;
        let name = &tail[..end];
        let expanded = std::env::var(name).map_err(|_| {
            PipelineError::Config(format!(
                "line {line}: environment variable {name} is not set"
            ))
        })?;
        out.push_str(&expanded);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

struct Pairs {
    map: BTreeMap<String, String>,
}

impl Pairs {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, PipelineError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| {
                PipelineError::Config(format!("key {key}: cannot parse {v:?}: {e}"))
            }),
        }
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build(map: BTreeMap<String, String>, base: &Path) -> Result<PipelineConfig, PipelineError> {
    let mut pairs = Pairs { map };
    let required_path = |pairs: &mut Pairs, key: &str| -> Result<PathBuf, PipelineError> {
        let value = pairs
            .take(key)
            .ok_or_else(|| PipelineError::Config(format!("missing required key {key:?}")))?;
        Ok(resolve(base, &value))
    };

    let interactions = required_path(&mut pairs, "interactions")?;
    let items = required_path(&mut pairs, "items")?;
    let users = pairs.take("users").map(|v| resolve(base, &v));
    let kb = pairs.take("kb").map(|v| resolve(base, &v));

    let completion_endpoint = pairs.take("completion_endpoint");
    let encoder_endpoint = pairs.take("encoder_endpoint");
    let completion_token_env = pairs
        .take("completion_token_env")
        .unwrap_or_else(|| COMPLETION_TOKEN_ENV.to_string());
    let encoder_token_env = pairs
        .take("encoder_token_env")
        .unwrap_or_else(|| ENCODER_TOKEN_ENV.to_string());

    let retrieval_k = pairs.parsed("retrieval_k")?.unwrap_or(100);
    let encoder_dim = pairs.parsed("encoder_dim")?.unwrap_or(64);
    let seed = pairs.parsed("seed")?.unwrap_or(17);

    let mut score = ScoreConfig::default();
    if let Some(lambda) = pairs.parsed("lambda")? {
        score.lambda = lambda;
    }
    if let Some(penalty) = pairs.parsed("overlap_penalty")? {
        score.overlap_penalty = penalty;
    }

    let mut split = SplitSpec::default();
    if let Some(ratios) = pairs.take("split_ratios") {
        split.ratios = parse_ratios(&ratios)?;
    }
    if let Some(n) = pairs.parsed("eval_negatives")? {
        split.eval_negatives = n;
    }
    split.seed = seed;

    let cold_start_threshold = pairs.parsed("cold_start_threshold")?.unwrap_or(3);
    let cutoffs = match pairs.take("cutoffs") {
        None => vec![1, 5, 10],
        Some(v) => parse_usize_list("cutoffs", &v)?,
    };

    let mut train = TrainConfig::default();
    if let Some(v) = pairs.parsed("dim")? {
        train.dim = v;
    }
    if let Some(v) = pairs.parsed("learning_rate")? {
        train.learning_rate = v;
    }
    if let Some(v) = pairs.parsed("epochs")? {
        train.epochs = v;
    }
    if let Some(v) = pairs.parsed("batch_size")? {
        train.batch_size = v;
    }
    if let Some(v) = pairs.parsed("negatives_per_positive")? {
        train.negatives_per_positive = v;
    }
    if let Some(v) = pairs.parsed("weight_decay")? {
        train.weight_decay = v;
    }
    if let Some(v) = pairs.parsed("entity_norm_penalty")? {
        train.entity_norm_penalty = v;
    }
    if let Some(v) = pairs.parsed("hyperplane_norm_penalty")? {
        train.hyperplane_norm_penalty = v;
    }
    if let Some(v) = pairs.parsed("conv_layers")? {
        train.conv_layers = v;
    }
    if let Some(v) = pairs.take("activation") {
        train.activation = match v.as_str() {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            other => {
                return Err(PipelineError::Config(format!(
                    "key activation: unknown value {other:?} (expected tanh, relu, or identity)"
                )))
            }
        };
    }
    if let Some(v) = pairs.take("variant") {
        train.variant = match v.as_str() {
            "intent-prior" => ModelVariant::IntentPrior,
            "vanilla-gnn" => ModelVariant::VanillaGnn,
            "vanilla-translation" => ModelVariant::VanillaTranslation,
            other => {
                return Err(PipelineError::Config(format!(
                    "key variant: unknown value {other:?} (expected intent-prior, \
                     vanilla-gnn, or vanilla-translation)"
                )))
            }
        };
    }
    train.seed = seed;

    let cache_dir = pairs
        .take("cache_dir")
        .map(|v| resolve(base, &v))
        .unwrap_or_else(|| base.join("cache"));
    let output_dir = pairs
        .take("output_dir")
        .map(|v| resolve(base, &v))
        .unwrap_or_else(|| base.join("out"));

    if let Some(unknown) = pairs.map.keys().next() {
        return Err(PipelineError::Config(format!("unknown key {unknown:?}")));
    }

    let config = PipelineConfig {
        interactions,
        items,
        users,
        kb,
        completion_endpoint,
        encoder_endpoint,
        completion_token_env,
        encoder_token_env,
        retrieval_k,
        encoder_dim,
        score,
        split,
        cold_start_threshold,
        cutoffs,
        train,
        seed,
        cache_dir,
        output_dir,
    };
    validate(&config)?;
    Ok(config)
}

fn parse_ratios(value: &str) -> Result<(f64, f64, f64), PipelineError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(PipelineError::Config(format!(
            "key split_ratios: expected three comma-separated numbers, got {value:?}"
        )));
    }
    let mut nums = [0.0; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| {
            PipelineError::Config(format!("key split_ratios: cannot parse {part:?}: {e}"))
        })?;
    }
    Ok((nums[0], nums[1], nums[2]))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, PipelineError> {
    value
        .split(',')
        .map(|part| {
            part.trim().parse().map_err(|e| {
                PipelineError::Config(format!("key {key}: cannot parse {:?}: {e}", part.trim()))
            })
        })
        .collect()
}

fn validate(config: &PipelineConfig) -> Result<(), PipelineError> {
    let require_file = |label: &str, path: &Path| -> Result<(), PipelineError> {
        if !path.is_file() {
            return Err(PipelineError::Config(format!(
                "{label} path does not exist: {}",
                path.display()
            )));
        }
        Ok(())
    };
    require_file("interactions", &config.interactions)?;
    require_file("items", &config.items)?;
    if let Some(users) = &config.users {
        require_file("users", users)?;
    }
    if let Some(kb) = &config.kb {
        require_file("kb", kb)?;
    }

    if config.retrieval_k == 0 {
        return Err(PipelineError::Config(
            "retrieval_k must be at least 1".into(),
        ));
    }
    if config.encoder_dim == 0 {
        return Err(PipelineError::Config("encoder_dim must be at least 1".into()));
    }
    if config.score.lambda < 0.0 {
        return Err(PipelineError::Config("lambda must be non-negative".into()));
    }
    if config.score.overlap_penalty < 0.0 {
        return Err(PipelineError::Config(
            "overlap_penalty must be non-negative".into(),
        ));
    }
    if config.cutoffs.is_empty() {
        return Err(PipelineError::Config("cutoffs must not be empty".into()));
    }
    if config.cutoffs.contains(&0) {
        return Err(PipelineError::Config("cutoffs must be at least 1".into()));
    }
    config
        .split
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    config
        .train
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(())
}
