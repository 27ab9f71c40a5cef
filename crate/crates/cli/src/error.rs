use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] capaf::CapError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => crate::EXIT_CONFIG,
            CliError::Core(
                capaf::CapError::InvalidAngle(_) | capaf::CapError::GridTooCoarse { .. },
            ) => crate::EXIT_CONFIG,
            _ => crate::EXIT_RUNTIME,
        }
    }
}
