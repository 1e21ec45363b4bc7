//! Staged pipeline execution with versioned, immutable artifacts.
//!
//! Four stages, each persisting everything the next one needs:
//!
//! 1. **build-kg** — ingest the raw dump into an interaction graph.
//! 2. **densify** — two-round intent extraction over every item and user.
//! 3. **train** — split interactions, fit embeddings over the train graph.
//! 4. **evaluate** — rank held-out positives against sampled negatives,
//!    overall and on the cold-start slice.
//!
//! A stage never edits an existing artifact directory: re-running writes
//! `v001`, `v002`, … and later stages always read the newest version. A
//! lock file keeps two invocations out of the same output directory, and a
//! manifest records configuration hash, template versions, artifact
//! digests, and live backend call counts for every run (partial if a stage
//! failed).

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::embed::{CachingEncoder, CountingEncoder, TextEncoder};
use crate::eval::{
    cold_start_slice, evaluate_queries, run_ablation, split_edges, stat_compare, AblationRow,
    AblationVariant, DataSplit, SplitSpec, DEFAULT_RESAMPLES,
};
use crate::extract::{
    run_extraction, CompletionClient, CountingClient, KnowledgeBase, PromptRunner, ResponseCache,
    SubjectText, ALL_TEMPLATES,
};
use crate::graph::{IntentGraph, NodeId, NodeKind, Provenance, RelationKind};
use crate::model::{load_checkpoint, save_checkpoint, ModelIndex, TrainConfig};
use crate::score::{RankingRequest, Scorer};

use super::dataset::load_dataset;
use super::{PipelineConfig, PipelineError};

// ---------------------------------------------------------------------------
// stages and versioned artifact directories
// ---------------------------------------------------------------------------

/// The four pipeline stages in canonical execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    BuildKg,
    Densify,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::BuildKg, Stage::Densify, Stage::Train, Stage::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::BuildKg => "build-kg",
            Stage::Densify => "densify",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn parse(text: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.as_str() == text)
    }

    /// The stage whose artifacts this one reads, if any.
    fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::BuildKg => None,
            Stage::Densify => Some(Stage::BuildKg),
            Stage::Train => Some(Stage::Densify),
            // Evaluate also needs a checkpoint; checked separately.
            Stage::Evaluate => Some(Stage::Densify),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The newest existing version directory for `stage`, if any.
fn latest_version_dir(output_dir: &Path, stage: Stage) -> Option<(u32, PathBuf)> {
    let stage_dir = output_dir.join(stage.as_str());
    let mut best: Option<(u32, PathBuf)> = None;
    for entry in std::fs::read_dir(&stage_dir).ok()?.flatten() {
        let name = entry.file_name();
        let Some(version) = name
            .to_str()
            .and_then(|n| n.strip_prefix('v'))
            .and_then(|n| n.parse::<u32>().ok())
        else {
            continue;
        };
        if best.as_ref().map(|(b, _)| version > *b).unwrap_or(true) {
            best = Some((version, entry.path()));
        }
    }
    best
}

/// Create the next version directory for `stage` (starting at v001).
fn new_version_dir(output_dir: &Path, stage: Stage) -> Result<(u32, PathBuf), PipelineError> {
    let next = latest_version_dir(output_dir, stage)
        .map(|(v, _)| v + 1)
        .unwrap_or(1);
    let dir = output_dir
        .join(stage.as_str())
        .join(format!("v{next:03}"));
    std::fs::create_dir_all(dir.parent().expect("stage dir"))?;
    std::fs::create_dir(&dir)?;
    Ok((next, dir))
}

/// Fail with [`PipelineError::StagePrereqMissing`] unless `missing` has run.
fn require_stage(
    output_dir: &Path,
    stage: Stage,
    missing: Stage,
) -> Result<PathBuf, PipelineError> {
    latest_version_dir(output_dir, missing)
        .map(|(_, dir)| dir)
        .ok_or(PipelineError::StagePrereqMissing { stage, missing })
}

/// RAII guard for the output-directory lock file.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(output_dir: &Path) -> Result<OutputLock, PipelineError> {
        std::fs::create_dir_all(output_dir)?;
        let path = output_dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(PipelineError::OutputLocked(path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

/// What one completed stage left on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: Stage,
    pub version: u32,
    /// `(relative file name, sha256 hex)`, sorted by name.
    pub artifacts: Vec<(String, String)>,
}

/// The audit record of one pipeline invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    /// Prompt template `(name, version)` pairs active during the run.
    pub templates: Vec<(String, String)>,
    pub stages: Vec<StageRecord>,
    /// Completion requests that reached the live backend (cache misses).
    pub completion_calls: u64,
    /// Texts that reached the live encoder (cache misses).
    pub encoder_calls: u64,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config_hash      {}", self.config_hash);
        let _ = writeln!(out, "seed             {}", self.seed);
        let templates = self
            .templates
            .iter()
            .map(|(n, v)| format!("{n} {v}"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "templates        {templates}");
        let _ = writeln!(out, "completion_calls {}", self.completion_calls);
        let _ = writeln!(out, "encoder_calls    {}", self.encoder_calls);
        for record in &self.stages {
            let _ = writeln!(out, "stage {} v{:03}", record.stage, record.version);
            for (name, digest) in &record.artifacts {
                let _ = writeln!(out, "  {name}  {digest}");
            }
        }
        out
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest: [u8; 32] = Sha256::digest(bytes).into();
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Collects a stage's artifact files: writes each one and remembers its
/// digest for the manifest.
struct ArtifactDir {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl ArtifactDir {
    fn new(dir: PathBuf) -> ArtifactDir {
        ArtifactDir {
            dir,
            entries: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), PipelineError> {
        std::fs::write(self.dir.join(name), contents)?;
        self.entries.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// Record a file some other API already wrote into the directory.
    fn record(&mut self, name: &str) -> Result<(), PipelineError> {
        let bytes = std::fs::read(self.dir.join(name))?;
        self.entries.push((name.to_string(), sha256_hex(&bytes)));
        Ok(())
    }

    fn into_record(mut self, stage: Stage, version: u32) -> StageRecord {
        self.entries.sort();
        StageRecord {
            stage,
            version,
            artifacts: self.entries,
        }
    }
}

// ---------------------------------------------------------------------------
// backends
// ---------------------------------------------------------------------------

/// The live text backends a run talks to on cache misses. Construct with
/// mocks for offline runs or HTTP clients for real ones; the pipeline wraps
/// both in call counters and disk caches.
pub struct Backends<'a> {
    pub completion: &'a dyn CompletionClient,
    pub encoder: &'a dyn TextEncoder,
}

// ---------------------------------------------------------------------------
// run_pipeline
// ---------------------------------------------------------------------------

/// Execute `stages` (any subset, re-ordered canonically) and write the run
/// manifest. On a stage failure the manifest still records the stages that
/// finished.
pub fn run_pipeline(
    config: &PipelineConfig,
    stages: &[Stage],
    backends: Backends<'_>,
) -> Result<RunManifest, PipelineError> {
    let mut plan: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| stages.contains(s))
        .collect();
    if plan.is_empty() {
        plan = Stage::ALL.to_vec();
    }

    let _lock = OutputLock::acquire(&config.output_dir)?;

    let completions = CountingClient::new(backends.completion);
    let response_cache = ResponseCache::at_dir(&config.cache_dir.join("completions"))?;
    let runner = PromptRunner::new(&completions, &response_cache);

    let counted_encoder = CountingEncoder::new(backends.encoder);
    let encoder = CachingEncoder::at_dir(&counted_encoder, &config.cache_dir.join("embeddings"))?;

    let mut manifest = RunManifest {
        config_hash: config.config_hash_hex(),
        seed: config.seed,
        templates: ALL_TEMPLATES
            .iter()
            .map(|t| (t.name.to_string(), t.version.to_string()))
            .collect(),
        stages: Vec::new(),
        completion_calls: 0,
        encoder_calls: 0,
    };

    let mut failure = None;
    for stage in plan {
        let result = match stage {
            Stage::BuildKg => run_build_kg(config),
            Stage::Densify => run_densify(config, &runner, &encoder),
            Stage::Train => run_train(config),
            Stage::Evaluate => run_evaluate(config),
        };
        match result {
            Ok(record) => manifest.stages.push(record),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    manifest.completion_calls = completions.calls();
    manifest.encoder_calls = counted_encoder.encoded();

    // Even a failed run leaves its partial manifest for auditing.
    let write = next_manifest_path(&config.output_dir)
        .and_then(|path| std::fs::write(path, manifest.to_text()));
    match failure {
        Some(e) => Err(e),
        None => {
            write?;
            Ok(manifest)
        }
    }
}

/// Manifests version alongside the stages: `manifests/v001.txt`, `v002.txt`, …
fn next_manifest_path(output_dir: &Path) -> std::io::Result<PathBuf> {
    let dir = output_dir.join("manifests");
    std::fs::create_dir_all(&dir)?;
    let mut max = 0u32;
    for entry in std::fs::read_dir(&dir)?.flatten() {
        let name = entry.file_name();
        if let Some(version) = name
            .to_str()
            .and_then(|n| n.strip_suffix(".txt"))
            .and_then(|n| n.strip_prefix('v'))
            .and_then(|n| n.parse::<u32>().ok())
        {
            max = max.max(version);
        }
    }
    Ok(dir.join(format!("v{:03}.txt", max + 1)))
}

// ---------------------------------------------------------------------------
// stage: build-kg
// ---------------------------------------------------------------------------

/// `kind<TAB>key<TAB>node_id` rows mapping external dataset keys to graph
/// node ids, written by build-kg and read by every later stage.
fn keys_table(users: &BTreeMap<String, NodeId>, items: &BTreeMap<String, NodeId>) -> String {
    let mut out = String::from("kind\tkey\tnode_id\n");
    for (key, id) in users {
        let _ = writeln!(out, "user\t{key}\t{id}");
    }
    for (key, id) in items {
        let _ = writeln!(out, "item\t{key}\t{id}");
    }
    out
}

fn parse_keys_table(
    path: &Path,
) -> Result<(BTreeMap<String, NodeId>, BTreeMap<String, NodeId>), PipelineError> {
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = std::fs::read_to_string(path)?;
    let mut users = BTreeMap::new();
    let mut items = BTreeMap::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::FormatViolation {
            file: file.clone(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        }
        let id = NodeId(
            fields[2]
                .parse::<u64>()
                .map_err(|e| bad(format!("bad node id {:?}: {e}", fields[2])))?,
        );
        match fields[0] {
            "user" => users.insert(fields[1].to_string(), id),
            "item" => items.insert(fields[1].to_string(), id),
            other => return Err(bad(format!("unknown kind {other:?}"))),
        };
    }
    Ok((users, items))
}

fn run_build_kg(config: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    let dataset = load_dataset(
        &config.interactions,
        &config.items,
        config.users.as_deref(),
    )?;

    let mut graph = IntentGraph::new();
    let mut user_nodes: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut item_nodes: BTreeMap<String, NodeId> = BTreeMap::new();

    // Users: everyone who interacted or has a profile, in sorted key order.
    let mut user_keys: Vec<&String> = dataset.users.keys().collect();
    user_keys.extend(dataset.interactions.iter().map(|i| &i.user_key));
    user_keys.sort();
    user_keys.dedup();
    for key in user_keys {
        user_nodes.insert(key.clone(), graph.add_user(key.clone()));
    }
    // Items: the full catalog, so never-consumed items still become ranking
    // candidates.
    for (key, record) in &dataset.items {
        item_nodes.insert(key.clone(), graph.add_item(record.name.clone()));
    }

    let mut duplicate_interactions = 0usize;
    for interaction in &dataset.interactions {
        let user = user_nodes[&interaction.user_key];
        let item = item_nodes[&interaction.item_key];
        match graph.add_edge(
            user,
            item,
            RelationKind::UserConsumesItem,
            Provenance::NotApplicable,
        ) {
            Ok(_) => {}
            Err(crate::graph::GraphError::DuplicateEdge { .. }) => duplicate_interactions += 1,
            Err(e) => return Err(e.into()),
        }
    }

    let (version, dir) = new_version_dir(&config.output_dir, Stage::BuildKg)?;
    let mut artifacts = ArtifactDir::new(dir);
    graph.save_to_path(&artifacts.dir.join("graph.tsv"))?;
    artifacts.record("graph.tsv")?;
    artifacts.write("keys.tsv", &keys_table(&user_nodes, &item_nodes))?;
    let mut report = dataset.report.to_text();
    let _ = writeln!(report, "duplicate interactions {duplicate_interactions}");
    artifacts.write("dataset-report.txt", &report)?;
    Ok(artifacts.into_record(Stage::BuildKg, version))
}

// ---------------------------------------------------------------------------
// stage: densify
// ---------------------------------------------------------------------------

/// Subject text for an item: name, description (or the generated expansion
/// for description-less items), and attributes.
fn item_subject_text(name: &str, body: &str, attributes: Option<&str>) -> String {
    let mut text = format!("{name}\n{body}");
    if let Some(attributes) = attributes {
        let _ = write!(text, "\nAttributes: {attributes}");
    }
    text
}

/// Fallback profile for users without one: their consumption history.
fn synthesized_profile(item_names: &[&str]) -> String {
    format!("Enjoys: {}.", item_names.join(", "))
}

fn run_densify<E: TextEncoder>(
    config: &PipelineConfig,
    runner: &PromptRunner<'_>,
    encoder: E,
) -> Result<StageRecord, PipelineError> {
    let prev = require_stage(&config.output_dir, Stage::Densify, Stage::BuildKg)?;
    let mut graph = IntentGraph::load_from_path(&prev.join("graph.tsv"))?;
    let (user_nodes, item_nodes) = parse_keys_table(&prev.join("keys.tsv"))?;
    let keys_forward = std::fs::read_to_string(prev.join("keys.tsv"))?;

    let kb = match &config.kb {
        Some(path) => KnowledgeBase::from_tsv_path(path)?,
        None => KnowledgeBase::new(),
    };
    let dataset = load_dataset(
        &config.interactions,
        &config.items,
        config.users.as_deref(),
    )?;

    // Items first (sorted by key), then users: expansion failures fall back
    // to the bare name so one flaky call cannot sink the whole stage.
    let mut subjects = Vec::new();
    let mut expansion_failures: Vec<(String, String)> = Vec::new();
    for (key, record) in &dataset.items {
        let node = *item_nodes.get(key).ok_or_else(|| {
            PipelineError::Config(format!(
                "item {key:?} is not in the built graph; re-run the build-kg stage"
            ))
        })?;
        let body = match &record.description {
            Some(desc) if !record.needs_expansion() => desc.clone(),
            _ => match crate::extract::expand_item_summary(&record.name, runner) {
                Ok(expanded) => expanded,
                Err(e) => {
                    expansion_failures.push((key.clone(), e.to_string()));
                    record.name.clone()
                }
            },
        };
        subjects.push(SubjectText {
            node,
            text: item_subject_text(&record.name, &body, record.attributes.as_deref()),
        });
    }

    // Consumption history per user, in interaction-file order, for the
    // profile-less.
    let mut history: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for interaction in &dataset.interactions {
        let names = history.entry(&interaction.user_key).or_default();
        let name = dataset.items[&interaction.item_key].name.as_str();
        if !names.contains(&name) {
            names.push(name);
        }
    }
    for (key, node) in &user_nodes {
        let text = match dataset.users.get(key) {
            Some(profile) => profile.clone(),
            None => synthesized_profile(
                history.get(key.as_str()).map(|v| v.as_slice()).unwrap_or(&[]),
            ),
        };
        subjects.push(SubjectText {
            node: *node,
            text,
        });
    }

    let outcome = run_extraction(
        &mut graph,
        &subjects,
        &kb,
        runner,
        &encoder,
        config.retrieval_k,
    )?;

    let (version, dir) = new_version_dir(&config.output_dir, Stage::Densify)?;
    let mut artifacts = ArtifactDir::new(dir);
    graph.save_to_path(&artifacts.dir.join("graph.tsv"))?;
    artifacts.record("graph.tsv")?;
    artifacts.write("keys.tsv", &keys_forward)?;

    let report = &outcome.report;
    let mut text = String::new();
    let _ = writeln!(text, "subjects           {}", report.subjects);
    let _ = writeln!(text, "exact labels       {}", report.exact_labels);
    let _ = writeln!(text, "related labels     {}", report.related_labels);
    let _ = writeln!(text, "vocabulary         {}", report.vocabulary);
    let _ = writeln!(text, "parse failures     {}", report.parse_failures);
    let _ = writeln!(text, "hallucinations     {}", report.hallucinations);
    let _ = writeln!(text, "duplicate edges    {}", report.duplicate_edges);
    let _ = writeln!(text, "failed subjects    {}", report.failed_subjects.len());
    for (node, reason) in &report.failed_subjects {
        let _ = writeln!(text, "  node {node}: {reason}");
    }
    let _ = writeln!(text, "expansion failures {}", expansion_failures.len());
    for (key, reason) in &expansion_failures {
        let _ = writeln!(text, "  item {key}: {reason}");
    }
    artifacts.write("extraction-report.txt", &text)?;

    let mut vocabulary: Vec<&str> = graph
        .nodes()
        .filter(|n| n.kind == NodeKind::Intent)
        .map(|n| n.label.as_str())
        .collect();
    vocabulary.sort_unstable();
    let mut vocab_text = vocabulary.join("\n");
    vocab_text.push('\n');
    artifacts.write("vocabulary.txt", &vocab_text)?;
    Ok(artifacts.into_record(Stage::Densify, version))
}

// ---------------------------------------------------------------------------
// stage: train
// ---------------------------------------------------------------------------

/// Load the newest densified graph and re-derive the interaction split;
/// seeded, so train and evaluate always agree on it.
fn densified_split(
    config: &PipelineConfig,
    stage: Stage,
) -> Result<(IntentGraph, DataSplit), PipelineError> {
    let prev = require_stage(&config.output_dir, stage, Stage::Densify)?;
    let graph = IntentGraph::load_from_path(&prev.join("graph.tsv"))?;
    let split = split_edges(&graph, &config.split)?;
    Ok((graph, split))
}

fn run_train(config: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    let (_, split) = densified_split(config, Stage::Train)?;
    let outcome = crate::model::train(&split.train_graph, &config.train)?;

    let (version, dir) = new_version_dir(&config.output_dir, Stage::Train)?;
    let mut artifacts = ArtifactDir::new(dir);
    save_checkpoint(
        &artifacts.dir.join("checkpoint.bin"),
        &outcome.params,
        &outcome.index.node_ids,
        &config.config_hash(),
    )?;
    artifacts.record("checkpoint.bin")?;

    let mut trace = String::from("epoch,loss\n");
    for epoch in &outcome.trace {
        let _ = writeln!(trace, "{},{}", epoch.epoch, epoch.loss);
    }
    artifacts.write("loss-trace.csv", &trace)?;
    Ok(artifacts.into_record(Stage::Train, version))
}

// ---------------------------------------------------------------------------
// stage: evaluate
// ---------------------------------------------------------------------------

/// Load the newest checkpoint, insisting it was trained under this exact
/// configuration and the same graph.
fn load_matching_checkpoint(
    config: &PipelineConfig,
    stage: Stage,
    graph: &IntentGraph,
) -> Result<crate::model::ModelParameters, PipelineError> {
    let train_dir = require_stage(&config.output_dir, stage, Stage::Train)?;
    let (params, node_ids, hash) = load_checkpoint(&train_dir.join("checkpoint.bin"))?;
    if hash != config.config_hash() {
        return Err(PipelineError::Config(
            "checkpoint was trained under a different configuration; re-run the train stage"
                .into(),
        ));
    }
    if node_ids != ModelIndex::build(graph).node_ids {
        return Err(PipelineError::Config(
            "checkpoint does not cover the current graph; re-run the train stage".into(),
        ));
    }
    Ok(params)
}

fn run_evaluate(config: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    let (_, split) = densified_split(config, Stage::Evaluate)?;
    let params = load_matching_checkpoint(config, Stage::Evaluate, &split.train_graph)?;

    let scorer = Scorer::new(&split.train_graph, &params, &config.train, config.score)?;
    let score = |user: NodeId, item: NodeId| {
        scorer
            .hybrid_score(user, item)
            .map(|b| b.final_score)
            .map_err(|e| e.to_string())
    };

    let report = evaluate_queries(&split.test, &config.cutoffs, None, score)?;
    let cold_queries = cold_start_slice(
        &split.test,
        &split.train_graph,
        config.cold_start_threshold,
    )?;

    let (version, dir) = new_version_dir(&config.output_dir, Stage::Evaluate)?;
    let mut artifacts = ArtifactDir::new(dir);
    artifacts.write("report.txt", &report.text_table())?;
    artifacts.write("report.kv", &report.key_value_lines())?;
    if cold_queries.is_empty() {
        artifacts.write("cold-start.txt", "cold-start slice is empty\n")?;
    } else {
        let cold = evaluate_queries(
            &cold_queries,
            &config.cutoffs,
            Some("cold-start".into()),
            score,
        )?;
        artifacts.write("cold-start.txt", &cold.text_table())?;
        artifacts.write("cold-start.kv", &cold.key_value_lines())?;
    }
    Ok(artifacts.into_record(Stage::Evaluate, version))
}

// ---------------------------------------------------------------------------
// operator commands
// ---------------------------------------------------------------------------

/// Remove cached completion responses whose template version is no longer
/// in `keep`. Returns the bytes freed; a missing cache directory frees
/// nothing. Unrecognized files are left alone.
pub fn cache_gc(cache_dir: &Path, keep: &[(&str, &str)]) -> Result<u64, PipelineError> {
    let completions = cache_dir.join("completions");
    let entries = match std::fs::read_dir(&completions) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e.into()),
    };
    let mut freed = 0u64;
    for entry in entries.flatten() {
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        // Cache files are `{template}.{version}.{hash}.txt`.
        let parts: Vec<&str> = name.split('.').collect();
        if parts.len() != 4 || parts[3] != "txt" {
            continue;
        }
        let (template, version) = (parts[0], parts[1]);
        let known_template = keep.iter().any(|(t, _)| *t == template);
        let retired = known_template && !keep.contains(&(template, version));
        if retired {
            let size = entry.metadata().map(|m| m.len()).unwrap_or(0);
            std::fs::remove_file(entry.path())?;
            freed += size;
        }
    }
    Ok(freed)
}

/// The template/version pairs currently compiled in, in the shape
/// [`cache_gc`] expects.
pub fn active_template_versions() -> Vec<(&'static str, &'static str)> {
    ALL_TEMPLATES.iter().map(|t| (t.name, t.version)).collect()
}

/// Table of corpus-level graph statistics: entity and edge counts, the
/// interaction density, and how many edges the average intent carries.
pub fn graph_stats_text(graph: &IntentGraph) -> String {
    let count_kind = |kind: NodeKind| graph.nodes().filter(|n| n.kind == kind).count();
    let users = count_kind(NodeKind::User);
    let items = count_kind(NodeKind::Item);
    let intents = count_kind(NodeKind::Intent);
    let interactions = graph
        .edges()
        .iter()
        .filter(|e| e.relation == RelationKind::UserConsumesItem)
        .count();
    let intent_edges = graph.edges().len() - interactions;
    let density = if users * items == 0 {
        0.0
    } else {
        100.0 * interactions as f64 / (users as f64 * items as f64)
    };
    let avg_intent_degree = if intents == 0 {
        0.0
    } else {
        intent_edges as f64 / intents as f64
    };
    let mut out = String::new();
    let _ = writeln!(out, "users         {users}");
    let _ = writeln!(out, "items         {items}");
    let _ = writeln!(out, "interactions  {interactions}");
    let _ = writeln!(out, "density       {density:.4}%");
    let _ = writeln!(out, "intents       {intents}");
    let _ = writeln!(out, "intent edges  {intent_edges}");
    let _ = writeln!(out, "avg intent deg {avg_intent_degree:.2}");
    out
}

/// Load the newest graph (densified if available, otherwise the raw build)
/// for inspection commands.
pub fn load_latest_graph(config: &PipelineConfig) -> Result<IntentGraph, PipelineError> {
    let dir = latest_version_dir(&config.output_dir, Stage::Densify)
        .or_else(|| latest_version_dir(&config.output_dir, Stage::BuildKg))
        .map(|(_, dir)| dir)
        .ok_or(PipelineError::StagePrereqMissing {
            stage: Stage::Densify,
            missing: Stage::BuildKg,
        })?;
    Ok(IntentGraph::load_from_path(&dir.join("graph.tsv"))?)
}

/// Score user→item pairs with the trained model and lay out per-user
/// rankings: `user item rank final intent embed` rows.
///
/// Scoring runs over the full densified graph — unlike evaluation, nothing
/// is held out, because re-ranking is a serving concern.
pub fn rerank_text(
    config: &PipelineConfig,
    pairs: &[(String, String)],
) -> Result<String, PipelineError> {
    let prev = require_stage(&config.output_dir, Stage::Evaluate, Stage::Densify)?;
    let graph = IntentGraph::load_from_path(&prev.join("graph.tsv"))?;
    let (user_nodes, item_nodes) = parse_keys_table(&prev.join("keys.tsv"))?;
    let params = load_matching_checkpoint(config, Stage::Evaluate, &graph)?;
    let scorer = Scorer::new(&graph, &params, &config.train, config.score)?;

    // Group candidates per user, keeping the order users first appear in.
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for (user_key, item_key) in pairs {
        let item = *item_nodes.get(item_key).ok_or_else(|| {
            PipelineError::Config(format!("unknown item key {item_key:?}"))
        })?;
        if !user_nodes.contains_key(user_key) {
            return Err(PipelineError::Config(format!(
                "unknown user key {user_key:?}"
            )));
        }
        if !grouped.contains_key(user_key.as_str()) {
            order.push(user_key.as_str());
        }
        grouped.entry(user_key.as_str()).or_default().push(item);
    }

    let item_keys: BTreeMap<NodeId, &str> = item_nodes
        .iter()
        .map(|(key, id)| (*id, key.as_str()))
        .collect();
    let mut out = String::from("user\titem\trank\tfinal\tintent\tembed\n");
    for user_key in order {
        let candidates = grouped[user_key].clone();
        let cutoff = candidates.len();
        let ranked = scorer.rank(&RankingRequest {
            user: user_nodes[user_key],
            candidates,
            cutoff,
        })?;
        for (position, candidate) in ranked.iter().enumerate() {
            let breakdown = candidate
                .breakdown
                .expect("rank always scores candidates");
            let _ = writeln!(
                out,
                "{user_key}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                item_keys[&candidate.item],
                position + 1,
                breakdown.final_score,
                breakdown.intent_score,
                breakdown.embed_score,
            );
        }
    }
    Ok(out)
}

/// Run the ablation grid over several seeds and append mean-MRR and paired
/// significance lines (every variant against the first).
pub fn ablate_text(
    config: &PipelineConfig,
    variants: &[AblationVariant],
    seeds: &[u64],
) -> Result<String, PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::Config("ablation needs at least one seed".into()));
    }
    let prev = require_stage(&config.output_dir, Stage::Train, Stage::Densify)?;
    let graph = IntentGraph::load_from_path(&prev.join("graph.tsv"))?;

    let mut out = String::new();
    let mut mrr_by_variant: BTreeMap<AblationVariant, Vec<f64>> = BTreeMap::new();
    for &seed in seeds {
        let split = SplitSpec {
            seed,
            ..config.split
        };
        let train = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let rows = run_ablation(
            &graph,
            &split,
            &train,
            &config.score,
            &config.cutoffs,
            variants,
        )?;
        let _ = writeln!(out, "seed {seed}");
        out.push_str(&crate::eval::ablation_table_text(&rows, &config.cutoffs));
        out.push('\n');
        record_mrrs(&mut mrr_by_variant, &rows);
    }

    let complete: Vec<(AblationVariant, &Vec<f64>)> = variants
        .iter()
        .filter_map(|v| {
            mrr_by_variant
                .get(v)
                .filter(|runs| runs.len() == seeds.len())
                .map(|runs| (*v, runs))
        })
        .collect();
    let _ = writeln!(out, "mean MRR over {} seed(s)", seeds.len());
    for (variant, runs) in &complete {
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let _ = writeln!(out, "  {:<18} {mean:.4}", variant.as_str());
    }
    if seeds.len() >= 2 {
        if let Some((baseline, baseline_runs)) = complete.first() {
            for (variant, runs) in complete.iter().skip(1) {
                let line = match stat_compare(
                    baseline_runs,
                    runs,
                    DEFAULT_RESAMPLES,
                    config.seed,
                ) {
                    Ok(cmp) => format!(
                        "p = {:.4} (t = {:.3}, mean diff = {:+.4})",
                        cmp.p_value, cmp.t_statistic, cmp.mean_diff
                    ),
                    Err(e) => format!("n/a ({e})"),
                };
                let _ = writeln!(
                    out,
                    "  {} vs {}: {line}",
                    baseline.as_str(),
                    variant.as_str()
                );
            }
        }
    }
    Ok(out)
}

fn record_mrrs(by_variant: &mut BTreeMap<AblationVariant, Vec<f64>>, rows: &[AblationRow]) {
    for row in rows {
        if let Ok(report) = &row.outcome {
            by_variant.entry(row.variant).or_default().push(report.mrr);
        }
    }
}
