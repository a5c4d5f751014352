use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration document.
    #[error("{origin}:{line}:{column}: {message}")]
    Config {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed but unusable configuration or arguments.
    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] geopulse::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            _ => 1,
        }
    }
}
