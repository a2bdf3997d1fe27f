use std::path::PathBuf;

use traitwave_core::dataset::ingest;
use traitwave_core::features::band_emotion_report;

use super::{write, Context};
use crate::STATS_FILE;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Summarize relative band power instead of absolute values
    #[arg(long)]
    pub relative: bool,

    /// Output JSON (default: stats.json in the data directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let records = ingest(&ctx.data_dir)?;
    let report = band_emotion_report(&records, args.relative)?;
    let path = ctx.path_or(&args.output, STATS_FILE);
    write(
        &path,
        serde_json::to_string_pretty(&report.to_json())? + "\n",
    )?;
    log::info!("wrote band statistics to {}", path.display());
    Ok(())
}
