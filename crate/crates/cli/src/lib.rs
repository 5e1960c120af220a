//! Command-line front end of the `imave` estimators.
//!
//! Structured results are written as canonical JSON and tables as CSV.
//! Failures print a single `ERROR <code>: <message>` line on standard error
//! and exit with status 2.

use std::ffi::{OsStr, OsString};

use clap::Parser;

pub mod args;
mod commands;
pub mod config;
pub mod error;
pub mod json;
pub mod model;
pub mod table;

pub use error::CliError;

const SUBCOMMANDS: [&str; 7] = ["fit", "fit2", "predict", "dimselect", "simulate", "evaluate", "study"];

/// Splices the flags of a `--config` file in right after the subcommand, so
/// that flags given explicitly come later and override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if arg == "--config" {
            config = argv.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.into());
        } else if arg == "--threads" && sub.is_none() {
            i += 2;
            continue;
        } else if sub.is_none() && SUBCOMMANDS.contains(&arg.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (config, sub) else {
        return Ok(argv);
    };
    let flags = config::config_flags(OsStr::new(&path).as_ref())?;
    let mut out = argv[..=sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

fn parse(argv: Vec<OsString>) -> Result<args::Cli, CliError> {
    let argv = expand_config(argv)?;
    args::Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp
        | clap::error::ErrorKind::DisplayVersion
        | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            std::process::exit(0);
        }
        _ => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            CliError::Usage(first.trim_start_matches("error: ").to_string())
        }
    })
}

/// Runs one invocation and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let outcome = parse(argv.into_iter().map(Into::into).collect()).and_then(|cli| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(|| commands::execute(&cli.command))
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            2
        }
    }
}
