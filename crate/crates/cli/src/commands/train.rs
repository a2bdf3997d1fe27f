use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use anyhow::Context as _;
use traitwave_core::classical::{
    accuracy_grid_csv, save_models, train_grid, Budget, GridConfig, SearchConfig,
};
use traitwave_core::dataset::{ingest, split_80_20};
use traitwave_core::deep::{save_deep_model, train_deep_grid, ModelKind, TrainConfig};
use traitwave_core::features::FeatureOptions;

use super::{write, Context};
use crate::{ACCURACY_GRID_FILE, DEEP_ACCURACY_FILE, DEEP_MODELS_DIR, MODELS_DIR, SPLIT_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Cross-validation folds per model search
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    /// Evaluate at most this many grid candidates per search (default: all)
    #[arg(long)]
    pub max_evaluations: Option<usize>,

    /// Z-score features with training statistics before the search
    #[arg(long)]
    pub standardize: bool,

    /// Use relative band power features
    #[arg(long)]
    pub relative: bool,

    /// Also train recurrent models of these kinds (lstm, bilstm); slow
    #[arg(long, value_delimiter = ',')]
    pub deep: Vec<ModelKind>,

    /// Epochs for the recurrent models
    #[arg(long, default_value_t = 50)]
    pub deep_epochs: usize,

    /// Keep natural-log band power off for the recurrent inputs
    #[arg(long)]
    pub deep_linear_inputs: bool,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let records = ingest(&ctx.data_dir)?;
    let split = split_80_20(&records, ctx.seed)?;
    split.save(&ctx.path(SPLIT_FILE))?;
    log::info!(
        "{} subjects: {} train, {} test",
        records.len(),
        split.train.len(),
        split.test.len()
    );

    let config = GridConfig {
        search: SearchConfig {
            folds: args.folds,
            budget: args
                .max_evaluations
                .map_or(Budget::Grid, Budget::MaxEvaluations),
            ..SearchConfig::default()
        },
        features: FeatureOptions {
            relative: args.relative,
        },
        standardize: args.standardize,
        seed: ctx.seed,
    };
    let start = Instant::now();
    let models = train_grid(&records, &split, &config)?;
    log::info!(
        "searched {} models in {:.1?}",
        models.len(),
        start.elapsed()
    );

    let dir = ctx.path(MODELS_DIR);
    if dir.is_dir() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
            }
        }
    }
    save_models(&models, &dir)?;
    write(&ctx.path(ACCURACY_GRID_FILE), accuracy_grid_csv(&models))?;

    if !args.deep.is_empty() {
        let mut kinds = args.deep.clone();
        kinds.sort();
        kinds.dedup();
        let deep_config = TrainConfig {
            epochs: args.deep_epochs,
            seed: ctx.seed,
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let deep = train_deep_grid(
            &records,
            &split,
            &kinds,
            &deep_config,
            !args.deep_linear_inputs,
        )?;
        log::info!(
            "trained {} recurrent models in {:.1?}",
            deep.len(),
            start.elapsed()
        );
        let test = split.test_records(&records);
        let mut csv =
            String::from("kind,trait,emotion,training_accuracy,test_accuracy,final_loss\n");
        for m in &deep {
            save_deep_model(m, &ctx.path(DEEP_MODELS_DIR))?;
            writeln!(
                csv,
                "{},{},{},{:.6},{:.6},{:.6}",
                m.kind,
                m.trait_,
                m.emotion,
                m.training_accuracy,
                m.accuracy(&test)?,
                m.final_loss
            )?;
        }
        write(&ctx.path(DEEP_ACCURACY_FILE), csv)?;
    }
    Ok(())
}
