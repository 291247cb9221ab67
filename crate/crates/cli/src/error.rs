use std::path::PathBuf;

use thiserror::Error;

/// Input and runtime errors; all map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: String, expected: u64 },
    #[error("{field}: unresolved reference `{name}`")]
    UnresolvedReference { field: String, name: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{operation}: {source}")]
    Module {
        operation: &'static str,
        source: nonadiabat::Error,
    },
}

impl CliError {
    pub fn parse(e: serde_json::Error) -> Self {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        Self::Parse {
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    }

    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn module(operation: &'static str) -> impl FnOnce(nonadiabat::Error) -> Self {
        move |source| Self::Module { operation, source }
    }
}
