use std::path::PathBuf;

use thiserror::Error;

/// Every failure maps to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("{stage}: {message}")]
    Compute {
        stage: &'static str,
        message: String,
    },
    #[error("output {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Compute { .. } => 4,
            CliError::Output { .. } => 5,
            CliError::Manifest(_) => 6,
        }
    }

    pub fn compute(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Compute {
            stage,
            message: e.to_string(),
        }
    }
}

impl From<bootband::PipelineError> for CliError {
    fn from(e: bootband::PipelineError) -> Self {
        match e {
            bootband::PipelineError::Config(m) => CliError::Usage(m),
            other => CliError::Compute {
                stage: other.stage(),
                message: other.to_string(),
            },
        }
    }
}
