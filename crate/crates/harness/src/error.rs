use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Solver(#[from] medclip::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("all {runs} runs failed; first error: {first}")]
    AllRunsFailed { runs: usize, first: String },
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 when every run
    /// failed numerically, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse { .. } => 2,
            HarnessError::Solver(e) => match e {
                medclip::Error::Parameter { .. }
                | medclip::Error::Schedule(_)
                | medclip::Error::Unsupported(_) => 2,
                _ => 3,
            },
            HarnessError::AllRunsFailed { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
