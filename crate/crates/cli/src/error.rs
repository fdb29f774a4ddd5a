use thiserror::Error;

/// Failures mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values, or lattice dimensions.
    #[error("usage error: {0}")]
    Usage(String),
    /// Missing, malformed, or corrupted input files.
    #[error("data error: {0}")]
    Data(String),
    /// Optimizer divergence, solver non-convergence, or no detectable transition.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<loopgas::Error> for CliError {
    fn from(e: loopgas::Error) -> Self {
        use loopgas::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) => CliError::Usage(msg),
            E::Numerical(_) | E::NoTransition(_) => CliError::Numerical(msg),
            E::DimensionMismatch { .. }
            | E::Version { .. }
            | E::Checksum { .. }
            | E::Format(_)
            | E::Io(_)
            | E::Json(_) => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
