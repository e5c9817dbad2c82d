use serde::Serialize;
use thiserror::Error;

use divfree::{CorrectorError, EnvError, GenError, LoadError, StatsError, WalkError};

/// Exit code for configuration and validation failures.
pub const EXIT_INVALID: i32 = 2;
/// Exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config key is missing, unknown or malformed, or an input is invalid.
    #[error("{message}")]
    Invalid { key: Option<String>, message: String },
    #[error("report does not match any known schema: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{message}")]
    Runtime { key: Option<String>, message: String },
    #[error("output {path} does not match the manifest (expected sha256 {expected}, got {got})")]
    NotReproduced {
        path: String,
        expected: String,
        got: String,
    },
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    key: Option<&'a str>,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn key(key: &str, message: impl Into<String>) -> Self {
        CliError::Invalid {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn io(path: &str, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } | CliError::SchemaMismatch(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        }
    }

    /// Attaches `key` to errors that do not name one yet.
    pub fn at(self, key: &str) -> Self {
        match self {
            CliError::Invalid { key: None, message } => CliError::Invalid {
                key: Some(key.to_string()),
                message,
            },
            CliError::Runtime { key: None, message } => CliError::Runtime {
                key: Some(key.to_string()),
                message,
            },
            other => other,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, key) = match self {
            CliError::Invalid { key, .. } => ("config", key.as_deref()),
            CliError::SchemaMismatch(_) => ("schema_mismatch", Some("report")),
            CliError::Io { .. } => ("io", None),
            CliError::Runtime { key, .. } => ("runtime", key.as_deref()),
            CliError::NotReproduced { .. } => ("not_reproduced", None),
        };
        serde_json::to_string(&ErrorJson {
            error: kind,
            key,
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error JSON serializes")
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid {
        key: None,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime {
        key: None,
        message: e.to_string(),
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        invalid(e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        invalid(e)
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(io) => runtime(io),
            other => invalid(other),
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        invalid(e)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        invalid(e)
    }
}

impl From<CorrectorError> for CliError {
    fn from(e: CorrectorError) -> Self {
        match e {
            CorrectorError::Env(env) => invalid(env),
            CorrectorError::BadLambda(_) => invalid(e),
            other => runtime(other),
        }
    }
}
