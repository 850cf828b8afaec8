use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{0}")]
    Simulation(lyra::Error),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(key: &str, reason: String) -> Self {
        CliError::Config {
            key: key.to_string(),
            reason,
        }
    }

    /// Core parameter errors become config errors at `key`.
    pub fn from_core(key: &str, e: lyra::Error) -> Self {
        match e {
            lyra::Error::InvalidParameter { reason, .. } => Self::config(key, reason),
            e => Self::config(key, e.to_string()),
        }
    }

    /// Like [`CliError::from_core`], with the offending field appended to `section`.
    pub fn from_core_in(section: &str, e: lyra::Error) -> Self {
        match e {
            lyra::Error::InvalidParameter { name, reason } => Self::config(&format!("{section}.{name}"), reason),
            e => Self::config(section, e.to_string()),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Config { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Simulation(_) => EXIT_SIMULATION,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

impl From<lyra::Error> for CliError {
    fn from(e: lyra::Error) -> Self {
        CliError::Simulation(e)
    }
}
