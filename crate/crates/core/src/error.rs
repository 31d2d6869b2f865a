use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, UpliftError>;

#[derive(Debug, Error)]
pub enum UpliftError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("non-dense treatment labels: {0}")]
    NonDenseTreatments(String),

    #[error("treatment {0} absent")]
    TreatmentAbsent(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported model format version {found} (supported: {supported})")]
    VersionMismatch { found: String, supported: u32 },

    #[error("malformed model document: {0}")]
    ModelFormat(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl UpliftError {
    /// Short stable identifier for the error class, used in the CLI's
    /// machine-parsable error line and mapped onto FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            UpliftError::Io { .. } => "io",
            UpliftError::Csv(_) => "csv",
            UpliftError::HeaderMismatch(_) => "header_mismatch",
            UpliftError::Parse { .. } => "parse",
            UpliftError::Schema(_) => "schema",
            UpliftError::NonDenseTreatments(_) => "non_dense_treatments",
            UpliftError::TreatmentAbsent(_) => "treatment_absent",
            UpliftError::EmptyDataset => "empty_dataset",
            UpliftError::InvalidParameter(_) => "invalid_parameter",
            UpliftError::SchemaMismatch(_) => "schema_mismatch",
            UpliftError::VersionMismatch { .. } => "version_mismatch",
            UpliftError::ModelFormat(_) => "model_format",
            UpliftError::Json(_) => "json",
            UpliftError::Config(_) => "config",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UpliftError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn param(msg: impl Into<String>) -> Self {
        UpliftError::InvalidParameter(msg.into())
    }
}
