//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("dimension mismatch: expected {expected}, got {actual}{}", context_suffix(.context))]
    Dimension {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("no stored concept for label(s): {}", .0.join(", "))]
    UncoveredLabels(Vec<String>),

    #[error("regression training failed for coordinate(s): {}", format_coord_failures(.0))]
    ImTraining(Vec<(usize, String)>),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dimension(expected: usize, actual: usize, context: impl Into<String>) -> Self {
        Error::Dimension {
            expected,
            actual,
            context: context.into(),
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

fn format_coord_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(idx, msg)| format!("{idx}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}
