use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use traitwave_core::codec::{decode_all, ParsedEvent};
use traitwave_core::simulator::{row_timestamp, DEFAULT_ROWS_PER_SECOND};
use traitwave_core::Band;

use super::{stdout, write, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Capture file to decode
    pub input: PathBuf,

    /// Row cadence used to assign timestamps
    #[arg(long, default_value_t = DEFAULT_ROWS_PER_SECOND)]
    pub rows_per_second: u32,

    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(_ctx: &Context, args: Args) -> anyhow::Result<()> {
    if args.rows_per_second == 0 {
        bail!("--rows-per-second must be positive");
    }
    let bytes =
        std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let (events, errors) = decode_all(&bytes);

    let mut csv = String::from("timestamp_ms");
    for b in Band::ALL {
        csv.push(',');
        csv.push_str(b.name());
    }
    csv.push('\n');
    let mut rows = 0u64;
    let mut other = 0usize;
    for e in &events {
        match e {
            ParsedEvent::EegPower(bands) => {
                write!(csv, "{}", row_timestamp(rows, args.rows_per_second))?;
                for v in bands {
                    write!(csv, ",{v}")?;
                }
                csv.push('\n');
                rows += 1;
            }
            _ => other += 1,
        }
    }
    match &args.output {
        Some(path) => write(path, &csv)?,
        None => stdout(&csv)?,
    }
    log::info!("{rows} band-power rows, {other} other events");
    for e in &errors {
        eprintln!("{}: {e}", args.input.display());
    }
    if let Some(first) = errors.first() {
        bail!(
            "{} frame error(s) in {}; first at byte offset {}",
            errors.len(),
            args.input.display(),
            first.offset
        );
    }
    Ok(())
}
