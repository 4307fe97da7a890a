//! Command-line front end: argument parsing, run manifests and the command
//! implementations behind the `gpsselect` binary.

pub mod args;
pub mod commands;
pub mod manifest;

use std::io::Write;

use gpsselect::{ErrorKind, GpsError};

pub use args::{Cli, Command};

/// Process exit code for an error.
pub fn exit_code(err: &GpsError) -> i32 {
    match err.kind() {
        ErrorKind::Input => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Internal => 3,
    }
}

/// Sizes the global thread pool from `GPSSELECT_THREADS` when set.
pub fn configure_threads() -> Result<(), GpsError> {
    let Ok(value) = std::env::var("GPSSELECT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            GpsError::InvalidParameter(format!(
                "GPSSELECT_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| GpsError::Internal(format!("cannot build thread pool: {e}")))
}

/// Runs a parsed command and writes its output.
pub fn execute(command: &Command) -> Result<(), GpsError> {
    let rendered = commands::run(command)?;
    match command.output() {
        Some(path) => std::fs::write(path, &rendered.text).map_err(|source| GpsError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| GpsError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    match rendered.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
