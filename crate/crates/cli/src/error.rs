use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{name}: {source}", name = .0.name(), source = .0)]
    Solver(#[from] divband::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Input validation failures are configuration errors, not solver errors.
    pub fn invalid(e: divband::Error) -> Self {
        CliError::Config(format!("{}: {e}", e.name()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(divband::Error::Config(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
