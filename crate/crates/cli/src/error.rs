use cise_core::CiseError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("cannot parse value at row {row}, column `{column}`: {detail}")]
    ParseError { row: usize, column: String, detail: String },

    #[error("need more rows than predictors, got n = {n} and p = {p}")]
    TooFewRows { n: usize, p: usize },

    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },

    #[error(transparent)]
    Core(#[from] CiseError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingColumn(_) => "MissingColumn",
            CliError::ParseError { .. } => "ParseError",
            CliError::TooFewRows { .. } => "TooFewRows",
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "IoError",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn report(&self) -> ErrorReport {
        let (row, column) = match self {
            CliError::ParseError { row, column, .. } => (Some(*row), Some(column.clone())),
            CliError::MissingColumn(c) => (None, Some(c.clone())),
            _ => (None, None),
        };
        ErrorReport {
            schema: crate::report::SCHEMA_VERSION,
            error: ErrorBody { kind: self.kind(), message: self.to_string(), row, column },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub schema: u32,
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

pub type CliResult<T> = std::result::Result<T, CliError>;
