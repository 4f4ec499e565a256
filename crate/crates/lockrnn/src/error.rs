use std::path::PathBuf;

use lockrnn_core::attacks::AttackError;
use lockrnn_core::bits::BitParseError;
use lockrnn_core::drnn::DrnnError;
use lockrnn_core::locking::LockError;
use lockrnn_core::netlist::NetlistError;
use lockrnn_core::simulator::{SimError, TableError};

/// Failures of the command-line workbench, grouped by where they arose.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Netlist(#[from] NetlistError),
    #[error("{0}")]
    Lock(#[from] LockError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Table(#[from] TableError),
    #[error("{0}")]
    Drnn(#[from] DrnnError),
    #[error("{0}")]
    Attack(#[from] AttackError),
    #[error("{0}")]
    Bits(#[from] BitParseError),
    #[error("{0}")]
    Config(String),
    /// A replayed report disagreed with its stored metrics.
    #[error("{}: replay differs at {}", path.display(), fields.join(", "))]
    ReplayMismatch { path: PathBuf, fields: Vec<String> },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Short category tag printed with the message.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Format { .. } | CliError::Bits(_) => "parse",
            CliError::Netlist(_) => "netlist",
            CliError::Lock(_) => "locking",
            CliError::Sim(_) | CliError::Table(_) => "simulator",
            CliError::Drnn(_) => "drnn",
            CliError::Attack(_) => "attacks",
            CliError::Config(_) => "config",
            CliError::ReplayMismatch { .. } => "replay",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ReplayMismatch { .. } => 6,
            CliError::Io { .. } => 3,
            CliError::Format { .. } | CliError::Bits(_) | CliError::Netlist(_) => 4,
            _ => 5,
        }
    }
}
