use std::process::ExitCode;

use clap::Parser;
use traitwave_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    traitwave_cli::init_logging(cli.verbose);
    match traitwave_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
