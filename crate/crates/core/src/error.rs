use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CtError {
    /// Inconsistent sizes, bad geometry or malformed configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric model parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An input file produced elsewhere (e.g. a network export) is missing.
    #[error("missing dependency: expected file {}", path.display())]
    Dependency { path: PathBuf },

    #[error("numerical divergence: non-finite value at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CtError {
    pub fn config(msg: impl Into<String>) -> Self {
        CtError::Config(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        CtError::Parameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CtError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            CtError::Config(_) | CtError::Parameter(_) | CtError::DegenerateInput(_) => 2,
            CtError::Io { .. } => 2,
            CtError::Dependency { .. } => 3,
            CtError::Divergence { .. } => 4,
        }
    }
}
