//! Configuration-driven experiment runner for the relaylab engines.
//!
//! `run` evaluates schemes over an optional parameter sweep, `cdf` computes
//! throughput distributions over the cell and `validate` runs the acceptance
//! checks. Results are CSV with a JSON sidecar holding the resolved config
//! and a SHA-256 of the CSV bytes.

// `!(a < b)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod run;

use thiserror::Error;

pub use config::ExperimentConfig;

/// Sidecar member holding the hex SHA-256 of the CSV it describes.
pub const SIDECAR_HASH_KEY: &str = "csv_sha256";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(relaylab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<relaylab::Error> for CliError {
    fn from(e: relaylab::Error) -> Self {
        use relaylab::Error as E;
        match e {
            E::InvalidParameter { .. } | E::DegenerateGeometry(_) | E::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e),
        }
    }
}

impl CliError {
    /// 2 for anything the user can fix in the config or invocation, 3 for
    /// failures inside the numerics.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 3,
            CliError::Config(_) | CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }
}
