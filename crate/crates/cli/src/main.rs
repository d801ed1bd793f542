use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use serde::Serialize;

mod config;
mod output;
mod stages;

use config::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Stage {
    /// Simulate the observed responses and their FRFs.
    Simulate,
    /// Generate the training dataset.
    Dataset,
    /// Train the VAE on the dataset.
    Train,
    /// Run replica exchange for every target.
    Update,
    /// Summarize the chains.
    Analyze,
    /// All of the above in order.
    Pipeline,
}

/// Bayesian updating of hysteretic structural models.
#[derive(Debug, Parser)]
#[command(name = "hystup", version)]
struct Args {
    stage: Stage,
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on a single worker thread.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    stage: Stage,
    seed: u64,
    deterministic: bool,
    config: &'a PipelineConfig,
}

fn threads(deterministic: bool) -> anyhow::Result<Option<usize>> {
    if deterministic {
        return Ok(Some(1));
    }
    match std::env::var("HYSTUP_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("HYSTUP_THREADS={v:?} is not a count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn run(args: &Args) -> anyhow::Result<()> {
    if let Some(n) = threads(args.deterministic)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = PipelineConfig::load(&args.config)?
        .resolve(args.seed, args.out.clone())
        .context("config")?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    output::write_json(
        &cfg.out.join(format!("manifest-{}.json", stage_name(args.stage))),
        &Manifest {
            tool: "hystup",
            version: env!("CARGO_PKG_VERSION"),
            stage: args.stage,
            seed: cfg.seed,
            deterministic: args.deterministic,
            config: &cfg,
        },
    )?;
    let order = match args.stage {
        Stage::Pipeline => vec![
            Stage::Simulate,
            Stage::Dataset,
            Stage::Train,
            Stage::Update,
            Stage::Analyze,
        ],
        s => vec![s],
    };
    for stage in order {
        log::info!("{} stage", stage_name(stage));
        let result = match stage {
            Stage::Simulate => stages::simulate(&cfg),
            Stage::Dataset => stages::dataset(&cfg).map(drop),
            Stage::Train => stages::train_vae(&cfg),
            Stage::Update => stages::update(&cfg),
            Stage::Analyze => stages::analyze(&cfg).map(drop),
            Stage::Pipeline => unreachable!(),
        };
        result.with_context(|| format!("{} stage failed", stage_name(stage)))?;
    }
    Ok(())
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Simulate => "simulate",
        Stage::Dataset => "dataset",
        Stage::Train => "train",
        Stage::Update => "update",
        Stage::Analyze => "analyze",
        Stage::Pipeline => "pipeline",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
