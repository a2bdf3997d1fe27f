use anyhow::Context as _;
use traitwave_service::{serve, AppState};

use super::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<()> {
    let state = AppState::open(&ctx.data_dir)
        .with_context(|| format!("opening {}", ctx.data_dir.display()))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        log::info!("listening on {}", listener.local_addr()?);
        serve(listener, state).await?;
        Ok(())
    })
}
