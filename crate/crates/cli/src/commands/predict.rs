use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use traitwave_core::classical::{
    load_models, load_selector, predict_from_segments, predict_traits_vote,
};
use traitwave_core::codec::{decode_all, ParsedEvent};
use traitwave_core::dataset::ingest;
use traitwave_core::features::extract_features_with;
use traitwave_core::simulator::{row_timestamp, DEFAULT_ROWS_PER_SECOND};
use traitwave_core::{BandPowerRow, Emotion, Segment};
use traitwave_service::source::capture_file_name;

use super::{stdout, Context};
use crate::{MODELS_DIR, SELECTOR_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Subject whose segments are used
    #[arg(long)]
    pub subject: String,

    /// Selector file (default: selector.json in the data directory)
    #[arg(long)]
    pub selector: Option<PathBuf>,

    /// Read <subject>_<emotion>.tgr captures from this directory instead of
    /// the dataset
    #[arg(long)]
    pub captures: Option<PathBuf>,

    /// Row cadence of the captures
    #[arg(long, default_value_t = DEFAULT_ROWS_PER_SECOND)]
    pub rows_per_second: u32,

    /// Majority vote over the four emotion models instead of the selector
    #[arg(long)]
    pub vote: bool,
}

fn capture_segments(
    dir: &std::path::Path,
    subject: &str,
    rows_per_second: u32,
) -> anyhow::Result<BTreeMap<Emotion, Segment>> {
    let mut out = BTreeMap::new();
    for e in Emotion::ALL {
        let path = dir.join(capture_file_name(subject, e));
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let (events, errors) = decode_all(&bytes);
        if let Some(first) = errors.first() {
            bail!("{}: {first}", path.display());
        }
        let rows: Vec<BandPowerRow> = events
            .into_iter()
            .filter_map(|ev| match ev {
                ParsedEvent::EegPower(b) => Some(b),
                _ => None,
            })
            .enumerate()
            .map(|(i, b)| BandPowerRow::new(row_timestamp(i as u64, rows_per_second), b))
            .collect();
        out.insert(e, Segment::new(subject.to_string(), e, rows));
    }
    Ok(out)
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    if args.rows_per_second == 0 {
        bail!("--rows-per-second must be positive");
    }
    let segments = match &args.captures {
        Some(dir) => capture_segments(dir, &args.subject, args.rows_per_second)?,
        None => {
            let records = ingest(&ctx.data_dir)?;
            let Some(r) = records.iter().find(|r| r.subject_id == args.subject) else {
                bail!("subject {} not in {}", args.subject, ctx.data_dir.display());
            };
            r.segments().map(|s| (s.emotion, s.clone())).collect()
        }
    };

    let predictions = if args.vote {
        let models = load_models(&ctx.path(MODELS_DIR))?;
        let Some(first) = models.first() else {
            bail!("no models in {}", ctx.path(MODELS_DIR).display());
        };
        let opts = first.parameters.features;
        let features: BTreeMap<Emotion, _> = segments
            .iter()
            .map(|(&e, s)| Ok((e, extract_features_with(s, opts)?)))
            .collect::<anyhow::Result<_>>()?;
        predict_traits_vote(&models, &features)?
    } else {
        let selector = load_selector(&ctx.path_or(&args.selector, SELECTOR_FILE))?;
        predict_from_segments(&selector, &segments)?
    };
    stdout(&(serde_json::to_string_pretty(&predictions)? + "\n"))?;
    Ok(())
}
