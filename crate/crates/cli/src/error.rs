use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<lltkde::Error> for CliError {
    fn from(e: lltkde::Error) -> Self {
        use lltkde::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter(_) | E::Unknown { .. } => CliError::Usage(msg),
            E::Domain(_) | E::InsufficientData(_) => CliError::Data(msg),
            E::NonConvergence { .. }
            | E::GridFit { .. }
            | E::NoFeasibleCandidate
            | E::Numerical(_) => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Prefixes a core error with what the command was doing.
pub trait Context<T> {
    fn context(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for lltkde::Result<T> {
    fn context(self, what: &str) -> CliResult<T> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
            other => other,
        })
    }
}
