//! `morpho`: training, gradient checks, basis extraction and activation
//! export from the command line.
//!
//! Exit codes: 0 on success, 1 when a check fails or training diverges,
//! 2 on bad flags or unreadable input.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => commands::train(c),
        Command::Gradcheck(c) => commands::gradcheck(c),
        Command::Basis(c) => commands::basis(c),
        Command::ExportActivation(c) => commands::export_activation(c),
        Command::Table1(c) => commands::table1(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
