use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension cap exceeded: {0}")]
    DimensionCap(qbp::Error),
    #[error("{0}")]
    Numeric(qbp::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl From<qbp::Error> for CliError {
    fn from(e: qbp::Error) -> Self {
        match e {
            qbp::Error::DimensionCap { .. } => CliError::DimensionCap(e),
            other => CliError::Numeric(other),
        }
    }
}

impl CliError {
    /// Errors raised while building the model are the config's fault, except the size cap.
    pub fn model(e: qbp::Error) -> Self {
        match e {
            qbp::Error::DimensionCap { .. } => CliError::DimensionCap(e),
            other => CliError::Config(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::DimensionCap(_) => 3,
            CliError::CheckFailed(_) => 4,
            _ => 1,
        }
    }
}
