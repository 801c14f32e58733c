use serde::Serialize;
use serde_json::json;
use thiserror::Error;

/// One failed check, addressed by its dotted path in the config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario: {}", join(.0))]
    Validation(Vec<FieldError>),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("cannot serialize scenario: {0}")]
    Serialize(String),

    #[error(transparent)]
    Engine(#[from] rr_core::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Serialize(_) => "serialize",
            CliError::Engine(_) => "engine",
        }
    }

    /// Configuration problems exit with 2, runtime failures with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Io { .. } | CliError::Serialize(_) | CliError::Engine(_) => 1,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse { line, column, .. } => {
                body["line"] = json!(line);
                body["column"] = json!(column);
            }
            CliError::Validation(errors) => body["errors"] = json!(errors),
            _ => {}
        }
        json!({ "error": body })
    }
}
