use anyhow::Context as _;
use traitwave_core::dataset::{export, simulated_records};
use traitwave_core::simulator::{
    sample_cohort, segment_to_wire, EffectConfig, EffectScale, DEFAULT_ROWS_PER_SECOND,
    DEFAULT_SEGMENT_SECONDS,
};
use traitwave_service::source::capture_file_name;

use super::{write, Context};
use crate::{CAPTURES_DIR, COHORT_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of subjects in the cohort
    #[arg(long, default_value_t = 80)]
    pub subjects: usize,

    /// Length of each emotion segment in seconds
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SECONDS)]
    pub seconds: u32,

    /// Band-power rows per second
    #[arg(long, default_value_t = DEFAULT_ROWS_PER_SECOND)]
    pub rows_per_second: u32,

    /// Trait effect size: null, weak, moderate, strong or a multiplier
    #[arg(long, default_value = "strong")]
    pub effect_scale: EffectScale,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let effects = EffectConfig::with_scale(args.effect_scale);
    let profiles = sample_cohort(args.subjects, &effects, ctx.seed)?;
    let records = simulated_records(&profiles, args.seconds, args.rows_per_second)?;

    let manifest: String = profiles
        .iter()
        .map(|p| serde_json::to_string(p).map(|s| s + "\n"))
        .collect::<Result<_, _>>()?;
    write(&ctx.path(COHORT_FILE), manifest)?;
    export(&records, &ctx.data_dir).context("exporting dataset")?;

    let captures = ctx.path(CAPTURES_DIR);
    let mut files = 0;
    for r in &records {
        for segment in r.segments() {
            let bytes = segment_to_wire(segment)?;
            write(
                &captures.join(capture_file_name(&r.subject_id, segment.emotion)),
                bytes,
            )?;
            files += 1;
        }
    }
    log::info!(
        "simulated {} subjects ({files} captures) into {}",
        records.len(),
        ctx.data_dir.display()
    );
    Ok(())
}
