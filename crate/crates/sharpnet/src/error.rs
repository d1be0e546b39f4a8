use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failures surfaced by the command-line tool. Each kind maps to one exit
/// code and one short machine-readable code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Numeric(_) => 4,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Data(_) => "data",
            Self::Numeric(_) => "numeric",
        }
    }

    /// Single-line `E:<code>:<message>` rendering.
    pub fn line(&self) -> String {
        format!("E:{}:{}", self.code(), self.to_string().replace('\n', " "))
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        Self::Data(format!("{}: {}", path.display(), err))
    }
}

impl From<sharpnet_core::Error> for CliError {
    fn from(err: sharpnet_core::Error) -> Self {
        use sharpnet_core::Error as E;
        match err {
            E::Data(_) | E::Format(_) => Self::Data(err.to_string()),
            E::Numeric(_) => Self::Numeric(err.to_string()),
            E::InvalidShape(_) | E::Contract(_) | E::InvalidArgument(_) | E::OutOfBounds(_) => {
                Self::Config(err.to_string())
            }
        }
    }
}
