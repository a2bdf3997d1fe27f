use std::fmt::Write as _;
use std::path::PathBuf;

use traitwave_core::dataset::ingest;
use traitwave_core::features::{record_features, FeatureOptions, FeatureVector};

use super::{write, Context};
use crate::FEATURES_FILE;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Use relative band power (each row divided by its total)
    #[arg(long)]
    pub relative: bool,

    /// Output CSV (default: features.csv in the data directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let records = ingest(&ctx.data_dir)?;
    let opts = FeatureOptions {
        relative: args.relative,
    };
    let mut csv = String::from("subject_id,emotion");
    for name in FeatureVector::column_names() {
        csv.push(',');
        csv.push_str(&name);
    }
    csv.push('\n');
    for r in &records {
        for fv in record_features(r, opts)?.values() {
            write!(csv, "{},{}", fv.subject_id, fv.emotion)?;
            for v in fv.values {
                write!(csv, ",{v}")?;
            }
            csv.push('\n');
        }
    }
    let path = ctx.path_or(&args.output, FEATURES_FILE);
    write(&path, csv)?;
    log::info!(
        "wrote {} feature rows to {}",
        records.len() * 4,
        path.display()
    );
    Ok(())
}
