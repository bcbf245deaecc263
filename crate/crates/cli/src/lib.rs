//! The `susnet` command-line pipeline.
//!
//! Each subcommand reads files, writes its outputs plus a `manifest.json`
//! into `--out`, and exits with 0 on success, 1 on a usage error, 2 on a
//! data error and 3 when an internal invariant is violated.

pub mod args;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: susnet_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data { source: susnet_core::Error::Invariant(_), .. } => EXIT_INVARIANT,
            CliError::Data { .. } => EXIT_DATA,
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T, E: Into<susnet_core::Error>> Context<T> for Result<T, E> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data { context: what(), source: e.into() })
    }
}

/// Parses `args` and runs the subcommand, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let started = Instant::now();
    match commands::execute(&cli, started) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("susnet {}: error: {e}", cli.command.name());
            if let CliError::Data { source: susnet_core::Error::Invariant(_), .. } = &e {
                eprintln!("internal invariant violated; please report this with the inputs and manifest flags");
            }
            e.exit_code()
        }
    }
}
