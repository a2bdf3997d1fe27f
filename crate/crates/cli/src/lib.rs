//! The `traitwave` command line.
//!
//! Every subcommand reads and writes a data directory:
//!
//! ```text
//! cohort.jsonl        subject profiles (simulate)
//! labels.jsonl        trait labels per subject
//! segments.csv        band-power rows per subject and emotion
//! captures/           <subject>_<emotion>.tgr wire captures
//! split.json          subject-level train/test split (train)
//! models/             one bundle per (trait, emotion) (train)
//! accuracy_grid.csv   search results for every model (train)
//! models/deep/        recurrent bundles and loss curves (train --deep)
//! deep_accuracy.csv   recurrent model accuracies (train --deep)
//! selector.json       chosen model per trait (select)
//! evaluation.csv      held-out accuracy per trait (evaluate)
//! features.csv        segment features (featurize)
//! stats.json          band-by-emotion boxplot statistics (stats)
//! ```

use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;

pub const COHORT_FILE: &str = "cohort.jsonl";
pub const CAPTURES_DIR: &str = "captures";
pub const SPLIT_FILE: &str = "split.json";
pub const MODELS_DIR: &str = "models";
pub const DEEP_MODELS_DIR: &str = "models/deep";
pub const ACCURACY_GRID_FILE: &str = "accuracy_grid.csv";
pub const DEEP_ACCURACY_FILE: &str = "deep_accuracy.csv";
pub const SELECTOR_FILE: &str = "selector.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const STATS_FILE: &str = "stats.json";
pub const EVALUATION_FILE: &str = "evaluation.csv";

#[derive(Debug, Parser)]
#[command(
    name = "traitwave",
    version,
    about = "Predict lifestyle traits from EEG band power"
)]
pub struct Cli {
    /// Seed for every random choice (cohort, split, model search)
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// Data directory read and written by every subcommand
    #[arg(
        long,
        global = true,
        env = "TRAITWAVE_DATA_DIR",
        default_value = "data"
    )]
    pub data_dir: PathBuf,

    /// Log more detail to stderr (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with labels, segments and wire captures
    Simulate(commands::simulate::Args),
    /// Decode a .tgr capture into band-power rows (CSV on stdout)
    Decode(commands::decode::Args),
    /// Write the 16 segment features for every subject and emotion
    Featurize(commands::featurize::Args),
    /// Boxplot statistics of every band under every emotion
    Stats(commands::stats::Args),
    /// Split subjects and search a model for every trait and emotion
    Train(commands::train::Args),
    /// Pick the best emotion model per trait
    Select(commands::select::Args),
    /// Predict the fourteen traits for one subject (JSON on stdout)
    Predict(commands::predict::Args),
    /// Per-trait accuracy of the selector on the held-out subjects
    Evaluate(commands::evaluate::Args),
    /// Run the HTTP and WebSocket session service
    Serve(commands::serve::Args),
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = commands::Context {
        seed: cli.seed,
        data_dir: cli.data_dir,
    };
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Decode(a) => commands::decode::run(&ctx, a),
        Command::Featurize(a) => commands::featurize::run(&ctx, a),
        Command::Stats(a) => commands::stats::run(&ctx, a),
        Command::Train(a) => commands::train::run(&ctx, a),
        Command::Select(a) => commands::select::run(&ctx, a),
        Command::Predict(a) => commands::predict::run(&ctx, a),
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Serve(a) => commands::serve::run(&ctx, a),
    }
}
