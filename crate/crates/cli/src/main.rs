mod args;
mod experiment;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = args::CliArgs::parse();
    match experiment::run_experiment(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
