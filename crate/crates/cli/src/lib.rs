//! Command-line front end for the dyntopic pipeline.

pub mod config;
pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::PipelineConfig;
use stages::{Runner, Stage};

#[derive(Debug, Parser)]
#[command(name = "dyntopic", version, about = "Two-layer NMF dynamic topic modeling for speech corpora")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; each stage writes into a subdirectory.
    #[arg(long, global = true, value_name = "DIR", default_value = "dyntopic-out")]
    pub out: PathBuf,
    /// Recompute stages even when their outputs are current.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize the corpus, partition it into windows and build TF-IDF matrices.
    Preprocess,
    /// Train a skip-gram embedding on the preprocessed corpus, or import one.
    Embed,
    /// Fit one NMF topic model per window, choosing k by coherence.
    WindowTopics,
    /// Stack window topics and factorize them into dynamic topics.
    DynamicTopics,
    /// Count speeches per dynamic topic and window.
    Timeseries,
    /// Cluster dynamic topics and match them against a taxonomy.
    Validate,
    /// Generate a synthetic corpus with planted topics.
    Synth {
        /// JSON planted-corpus spec; the built-in standard spec when omitted.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
    },
    /// Run every modeling stage in order, skipping those already current.
    Pipeline,
}

pub fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    config.apply_overrides(&cli.overrides)?;
    config.output = cli.out.clone();
    config.validate()?;
    Ok(config)
}

pub fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let mut runner = Runner::new(config);
    runner.force = cli.force;
    let stage = match cli.command {
        Command::Preprocess => Stage::Preprocess,
        Command::Embed => Stage::Embed,
        Command::WindowTopics => Stage::WindowTopics,
        Command::DynamicTopics => Stage::DynamicTopics,
        Command::Timeseries => Stage::Timeseries,
        Command::Validate => Stage::Validate,
        Command::Synth { spec } => {
            runner.synth_spec = spec;
            Stage::Synth
        }
        Command::Pipeline => return runner.run_pipeline(),
    };
    runner.run(stage)
}
