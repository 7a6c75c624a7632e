//! `netmatch` command-line interface.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status for a library error.
fn exit_code(err: &anyhow::Error) -> u8 {
    use netmatch::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Undefined(_)) => 3,
        Some(Error::Numerical(_)) => 4,
        Some(_) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
