//! Offline run orchestration: configuration, dataset ingestion, and the
//! staged build → densify → train → evaluate pipeline with versioned,
//! immutable artifacts.
//!
//! The pipeline is what operators drive from the command line. Every stage
//! reads the artifacts of the previous one from disk, so runs can be
//! resumed, re-executed, or audited stage by stage. All randomness flows
//! from the single `seed` key in [`PipelineConfig`], and a manifest records
//! the configuration hash, prompt template versions, artifact digests, and
//! how many live backend calls the run needed (zero once caches are warm).

mod config;
mod dataset;
mod stages;

use std::path::PathBuf;

use thiserror::Error;

pub use config::PipelineConfig;
pub use dataset::{load_dataset, Interaction, ItemRecord, LoadReport, RawDataset, RejectedRow};
pub use stages::{
    ablate_text, active_template_versions, cache_gc, graph_stats_text, load_latest_graph,
    rerank_text, run_pipeline, Backends, RunManifest, Stage, StageRecord,
};

use crate::embed::EmbedError;
use crate::eval::EvalError;
use crate::extract::ExtractError;
use crate::graph::GraphError;
use crate::model::ModelError;
use crate::score::ScoreError;

/// Everything that can stop a run, each class with its own exit code so
/// shell callers can branch on the kind of failure.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad or missing configuration (unknown key, unreadable path, invalid
    /// value, unset environment variable).
    #[error("configuration: {0}")]
    Config(String),
    /// A data file line that cannot be parsed at all (structural damage, as
    /// opposed to per-row rejections which are counted and skipped).
    #[error("{file}:{line}: {message}")]
    FormatViolation {
        file: String,
        line: usize,
        message: String,
    },
    /// A data file header lacks a required column.
    #[error("{file}: missing required column \"{field}\"")]
    MissingField { file: String, field: String },
    /// A stage was requested before the stage it consumes has ever run.
    #[error("stage {stage} needs artifacts from {missing}; run that stage first")]
    StagePrereqMissing { stage: Stage, missing: Stage },
    /// Another process holds the output directory.
    #[error("output directory already locked: {}", .0.display())]
    OutputLocked(PathBuf),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code for this error class. `0` is success and `2` is
    /// reserved for command-line usage errors, so classes start at 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 3,
            PipelineError::FormatViolation { .. } | PipelineError::MissingField { .. } => 4,
            PipelineError::StagePrereqMissing { .. } => 5,
            PipelineError::OutputLocked(_) => 6,
            PipelineError::Graph(_) | PipelineError::Extract(_) | PipelineError::Embed(_) => 7,
            PipelineError::Model(_) => 8,
            PipelineError::Score(_) | PipelineError::Eval(_) => 9,
            PipelineError::Io(_) => 10,
        }
    }
}
