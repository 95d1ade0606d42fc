mod args;
mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Quantiles(a) => commands::quantiles(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Rates(a) => commands::rates(a),
        Command::Kernel(a) => commands::kernel(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
