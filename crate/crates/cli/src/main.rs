mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::resolve;

fn run(cli: Cli) -> error::CliResult<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(resolve(&a.opts, a.config.as_deref())?),
        Command::Preprocess(a) => commands::preprocess(resolve(&a.opts, a.config.as_deref())?),
        Command::Fit(a) => commands::fit(resolve(&a.opts, a.config.as_deref())?),
        Command::Summarize(a) => commands::summarize(resolve(&a.opts, a.config.as_deref())?),
        Command::Evaluate(a) => commands::evaluate(resolve(&a.opts, a.config.as_deref())?),
        Command::Benchmark(a) => commands::benchmark(resolve(&a.opts, a.config.as_deref())?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WSBM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
