mod args;
mod commands;
mod config;
mod exit;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::FileConfig;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Generate(args) => commands::generate(args, &file),
        Command::Stats(args) => commands::stats(args, &file),
        Command::Mine(args) => commands::mine(args, &file),
        Command::Recommend(args) => commands::recommend_cmd(args, &file),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
