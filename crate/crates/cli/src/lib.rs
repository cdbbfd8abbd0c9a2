//! Library side of the `surveykit` binary, so commands can be driven from tests.

pub mod args;
pub mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use thiserror::Error;

pub use args::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: surveykit::Error,
    },
    #[error("writing output: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] surveykit::Error),
    #[error("verification failed: {failed} of {total} rows outside tolerance")]
    VerificationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn output(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }

    /// 0 success, 1 usage, 2 I/O, 3 numerical degeneracy, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Output(_) => 2,
            CliError::Input { source, .. } => core_exit_code(source),
            CliError::Core(e) => core_exit_code(e),
            CliError::VerificationFailed { .. } => 4,
        }
    }
}

fn core_exit_code(e: &surveykit::Error) -> i32 {
    use surveykit::Error as E;
    match e {
        E::Io(_) | E::Csv(_) | E::MissingColumn(_) | E::NonNumericCell { .. } | E::TooFewRows(_) => 2,
        E::EstimatorFailed { .. } | E::ReplicateFailed { .. } => 3,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

/// Parses `args` and runs one command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match commands::dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
