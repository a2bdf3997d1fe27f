use std::path::PathBuf;

use traitwave_core::classical::{load_models, save_selector, select_per_trait};

use super::Context;
use crate::{MODELS_DIR, SELECTOR_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of trained bundles (default: models/ in the data directory)
    #[arg(long)]
    pub models: Option<PathBuf>,

    /// Selector file to write (default: selector.json in the data directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let dir = ctx.path_or(&args.models, MODELS_DIR);
    let models = load_models(&dir)?;
    let selector = select_per_trait(&models)?;
    let output = ctx.path_or(&args.output, SELECTOR_FILE);
    save_selector(&selector, &output, &dir)?;
    for m in selector.entries() {
        log::info!(
            "{}: {} via {} (training accuracy {:.3})",
            m.trait_,
            m.emotion,
            m.spec.family(),
            m.training_accuracy
        );
    }
    log::info!("wrote {}", output.display());
    Ok(())
}
