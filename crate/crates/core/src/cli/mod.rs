//! Config-driven batch front end behind the `nlfem` binary.
//!
//! ```text
//! nlfem <command> --config <file> [--out <prefix>]
//! ```
//!
//! Exit status 0 on success, 2 for configuration errors (bad or unknown
//! keys, out-of-range parameters), 3 for numerical failures.

pub mod config;
pub mod report;
pub mod run;

use std::fmt;

pub use config::{builtin, Config};
pub use report::{estimate_rates, Rates, StudyReport};
pub use run::{run, Command};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(crate::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::InvalidParameter { .. } | E::IndexOutOfRange(_) | E::UnsupportedKernel(_) | E::MeshMismatch(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
