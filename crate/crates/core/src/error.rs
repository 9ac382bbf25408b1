use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its invariants. `path` is the
    /// dotted key path in the scenario config (e.g. `generator.H`).
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    /// Several configuration problems found at once.
    #[error("{} configuration error(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    ConfigList(Vec<Error>),

    #[error("failed to parse {file}: {message}")]
    Parse { file: PathBuf, message: String },

    /// Phasor magnitude too small for its argument to be meaningful.
    #[error("degenerate operating point: |psi| = {magnitude:e} is below {threshold:e}")]
    Degenerate { magnitude: f64, threshold: f64 },

    /// The ground-truth simulation produced a non-finite or unphysical state.
    #[error("simulation fault at t = {t} s: {message}")]
    Simulation { t: f64, message: String },

    /// The adaptive observer state became non-finite.
    #[error("estimator diverged at t = {t} s")]
    Divergence { t: f64 },

    #[error("{message}")]
    Analysis { message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::ConfigList(_) | Error::Parse { .. } => 1,
            Error::Divergence { .. } => 2,
            Error::Io { .. } => 3,
            Error::Degenerate { .. } | Error::Simulation { .. } | Error::Analysis { .. } => 2,
        }
    }
}
