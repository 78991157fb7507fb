use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One validation problem, tied to the record or row it was found in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Where the problem is: a record id, or `row N` for file input.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed schema file {path}: {message}")]
    SchemaFile { path: PathBuf, message: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid log ({} problem{}):{}", .0.len(), if .0.len() == 1 { "" } else { "s" },
            .0.iter().map(|d| format!("\n  {d}")).collect::<String>())]
    InvalidLog(Vec<Diagnostic>),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid query ({} problem{}):{}", .0.len(), if .0.len() == 1 { "" } else { "s" },
            .0.iter().map(|d| format!("\n  {d}")).collect::<String>())]
    InvalidQuery(Vec<Diagnostic>),

    #[error("no record with id {0:?} in the log")]
    UnknownRecord(String),

    #[error("no pairs in the log are related to the query")]
    NoRelatedPairs,

    #[error("no similar pairs at threshold {threshold}")]
    NoSimilarPairs { threshold: f64 },

    #[error("degenerate log: {0}")]
    DegenerateLog(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for query validation failures,
    /// 3 when the log has no related pairs, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidQuery(_) => 2,
            Error::NoRelatedPairs => 3,
            _ => 1,
        }
    }
}
