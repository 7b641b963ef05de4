//! The `citylab` command: one process serving the resource monitor, data
//! lake intake, data exchange and quality pipeline, plus the tools that
//! seed, simulate, query and inspect it.

pub mod campus;
pub mod cli;
pub mod commands;
pub mod config;
pub mod seed;
pub mod serve;
pub mod stack;

use std::io::Write;
use std::process::ExitCode;

pub use commands::{Output, Usage};
pub use config::Config;
pub use stack::Stack;

/// Runs a parsed command line and prints its result. Exit status is 0 on
/// success, 1 when the platform refused or failed, 2 for bad configuration
/// or arguments.
pub async fn run(cli: cli::Cli) -> ExitCode {
    let json = cli.json;
    match commands::run(cli).await {
        Ok(out) => {
            // a closed pipe downstream is not our failure
            let mut stdout = std::io::stdout().lock();
            let _ = if json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&out.value).unwrap_or_default())
            } else if !out.text.is_empty() {
                writeln!(stdout, "{}", out.text)
            } else {
                Ok(())
            };
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
