//! Command implementations behind the `motsink` binary, exposed as a
//! library so the test suites can drive them directly.

pub mod bench;
pub mod errsweep;
pub mod experiments;
pub mod gen;
pub mod io;
pub mod spec;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] motsink_core::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    /// A numerical check ran to completion and exceeded its tolerance.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// Process exit code: 2 usage, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(motsink_core::Error::Io { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Parse { .. } | CliError::Io { .. } => 4,
            CliError::Usage(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
