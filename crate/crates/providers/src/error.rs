use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ProviderError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid provider config: {0}")]
    Config(String),

    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("request failed: {0}")]
    Request(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("extraction failed: {message}\n--- raw response ---\n{raw}")]
    Extraction { message: String, raw: String },

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("no probability for sketch `{0}`")]
    MissingProbability(String),

    #[error("sketch `{sketch_id}`: class `{class}` is not in the database")]
    UnknownClass { sketch_id: String, class: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] sea_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
