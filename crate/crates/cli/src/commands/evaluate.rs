use std::fmt::Write as _;
use std::path::PathBuf;

use traitwave_core::classical::{evaluate_selector, load_selector};
use traitwave_core::dataset::{ingest, Split};

use super::{stdout, write, Context};
use crate::{EVALUATION_FILE, SELECTOR_FILE, SPLIT_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Selector file (default: selector.json in the data directory)
    #[arg(long)]
    pub selector: Option<PathBuf>,

    /// Split file (default: split.json in the data directory)
    #[arg(long)]
    pub split: Option<PathBuf>,

    /// Also write the CSV here (default: evaluation.csv in the data directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let records = ingest(&ctx.data_dir)?;
    let split = Split::load(&ctx.path_or(&args.split, SPLIT_FILE))?;
    let selector = load_selector(&ctx.path_or(&args.selector, SELECTOR_FILE))?;
    let test = split.test_records(&records);
    let results = evaluate_selector(&selector, &test)?;

    let mut csv = String::from("trait,emotion,family,correct,total,accuracy\n");
    for a in &results {
        writeln!(
            csv,
            "{},{},{},{},{},{:.6}",
            a.trait_, a.emotion, a.family, a.correct, a.total, a.accuracy
        )?;
    }
    write(&ctx.path_or(&args.output, EVALUATION_FILE), &csv)?;
    stdout(&csv)?;
    let mean = results.iter().map(|a| a.accuracy).sum::<f64>() / results.len() as f64;
    log::info!(
        "mean held-out accuracy over {} subjects: {mean:.3}",
        test.len()
    );
    Ok(())
}
