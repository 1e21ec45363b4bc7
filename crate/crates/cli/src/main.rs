//! Command-line driver for the intentrec pipeline.
//!
//! Every subcommand reads the flat `key = value` config named by
//! `--config`, runs one operation, and exits with a class-specific code:
//! 0 success, 2 usage, 3 configuration, 4 data format, 5 missing stage
//! prerequisite, 6 output lock, 7 graph/extraction/embedding, 8 training,
//! 9 scoring/evaluation, 10 I/O. Endpoint bearer tokens are read from the
//! environment variables named in the config, never from the config
//! itself.

use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use intentrec::embed::{HashEncoder, HttpTextEncoder, TextEncoder};
use intentrec::eval::AblationVariant;
use intentrec::extract::{CompletionClient, HttpCompletionClient, MockCompletionClient};
use intentrec::pipeline::{
    ablate_text, active_template_versions, cache_gc, graph_stats_text, load_latest_graph,
    rerank_text, run_pipeline, Backends, PipelineConfig, PipelineError, Stage,
};

#[derive(Parser)]
#[command(
    name = "intentrec",
    version,
    about = "Intent-graph recommendation pipeline: build, densify, train, evaluate"
)]
struct Cli {
    /// Run configuration file (flat key = value lines).
    #[arg(long, global = true, default_value = "intentrec.conf")]
    config: PathBuf,

    /// Override the root seed; the interaction split and the trainer follow.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Use the deterministic offline completion mock instead of an HTTP
    /// endpoint.
    #[arg(long, global = true)]
    mock_llm: bool,

    /// Use the deterministic hash encoder instead of an HTTP endpoint.
    #[arg(long, global = true)]
    mock_encoder: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the raw dataset into an interaction graph.
    BuildKg,
    /// Extract intents for every item and user and densify the graph.
    Densify,
    /// Split interactions and train the embedding model.
    Train,
    /// Rank held-out interactions and report HR/NDCG/MRR, overall and
    /// cold-start.
    Evaluate,
    /// Score user–item pairs with the trained model and print per-user
    /// rankings.
    Rerank {
        /// Headerless TSV of `user_key<TAB>item_key` pairs; `-` reads
        /// standard input.
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Train and evaluate ablation variants over several seeds, with paired
    /// significance against the first variant.
    Ablate {
        /// Comma-separated variant names.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "int-prior-gnn,no-related-intent,no-intent"
        )]
        variants: Vec<String>,
        /// How many seeds to run (root seed, root seed + 1, …).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Print entity/edge counts and density of the newest graph.
    Stats,
    /// Delete cached completions left behind by retired prompt template
    /// versions.
    CacheGc,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = PipelineConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }

    match &cli.command {
        Command::BuildKg => run_stage(&cli, &config, Stage::BuildKg),
        Command::Densify => run_stage(&cli, &config, Stage::Densify),
        Command::Train => run_stage(&cli, &config, Stage::Train),
        Command::Evaluate => run_stage(&cli, &config, Stage::Evaluate),
        Command::Rerank { pairs } => {
            let pairs = read_pairs(pairs)?;
            print!("{}", rerank_text(&config, &pairs)?);
            Ok(())
        }
        Command::Ablate { variants, seeds } => {
            let variants = parse_variants(variants)?;
            let seeds: Vec<u64> = (0..*seeds).map(|i| config.seed + i).collect();
            print!("{}", ablate_text(&config, &variants, &seeds)?);
            Ok(())
        }
        Command::Stats => {
            let graph = load_latest_graph(&config)?;
            print!("{}", graph_stats_text(&graph));
            Ok(())
        }
        Command::CacheGc => {
            let freed = cache_gc(&config.cache_dir, &active_template_versions())?;
            println!("freed {freed} bytes");
            Ok(())
        }
    }
}

fn run_stage(cli: &Cli, config: &PipelineConfig, stage: Stage) -> Result<(), PipelineError> {
    // Only densify talks to the backends; the other stages get the offline
    // ones so fully local workflows never demand endpoint settings.
    let needs_backends = stage == Stage::Densify;
    let completion = build_completion(cli, config, needs_backends)?;
    let encoder = build_encoder(cli, config, needs_backends)?;
    let manifest = run_pipeline(
        config,
        &[stage],
        Backends {
            completion: completion.as_ref(),
            encoder: encoder.as_ref(),
        },
    )?;
    print!("{}", manifest.to_text());
    Ok(())
}

fn build_completion(
    cli: &Cli,
    config: &PipelineConfig,
    required: bool,
) -> Result<Box<dyn CompletionClient>, PipelineError> {
    if cli.mock_llm {
        return Ok(Box::new(MockCompletionClient));
    }
    match &config.completion_endpoint {
        Some(endpoint) => Ok(Box::new(HttpCompletionClient::new(
            endpoint.clone(),
            config.completion_token_env.clone(),
        )?)),
        None if required => Err(PipelineError::Config(
            "no completion_endpoint configured; set one or pass --mock-llm".into(),
        )),
        None => Ok(Box::new(MockCompletionClient)),
    }
}

fn build_encoder(
    cli: &Cli,
    config: &PipelineConfig,
    required: bool,
) -> Result<Box<dyn TextEncoder>, PipelineError> {
    if cli.mock_encoder {
        return Ok(Box::new(HashEncoder::new(config.encoder_dim)));
    }
    match &config.encoder_endpoint {
        Some(endpoint) => Ok(Box::new(HttpTextEncoder::new(
            endpoint.clone(),
            config.encoder_token_env.clone(),
            config.encoder_dim,
        )?)),
        None if required => Err(PipelineError::Config(
            "no encoder_endpoint configured; set one or pass --mock-encoder".into(),
        )),
        None => Ok(Box::new(HashEncoder::new(config.encoder_dim))),
    }
}

fn parse_variants(names: &[String]) -> Result<Vec<AblationVariant>, PipelineError> {
    names
        .iter()
        .map(|name| {
            AblationVariant::parse(name).ok_or_else(|| {
                let known = AblationVariant::ALL
                    .iter()
                    .map(|v| v.as_str())
                    .collect::<Vec<_>>()
                    .join(", ");
                PipelineError::Config(format!("unknown variant {name:?} (known: {known})"))
            })
        })
        .collect()
}

fn read_pairs(path: &PathBuf) -> Result<Vec<(String, String)>, PipelineError> {
    let text = if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(path)?
    };
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((user, item)) = line.split_once('\t') else {
            return Err(PipelineError::Config(format!(
                "pairs line {}: expected user<TAB>item, got {line:?}",
                idx + 1
            )));
        };
        pairs.push((user.trim().to_string(), item.trim().to_string()));
    }
    if pairs.is_empty() {
        return Err(PipelineError::Config("pairs input is empty".into()));
    }
    Ok(pairs)
}
