use std::process::ExitCode;

use clap::Parser;
use evclust_cli::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match RunConfig::resolve(&cli.flags).and_then(|cfg| run(cli.command, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
