use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("record {crash_key}: all narrative parts are empty")]
    EmptyNarrative { crash_key: String },

    #[error("unknown road type {0:?}")]
    UnknownRoadType(String),

    #[error("duplicate crash key {0:?}")]
    DuplicateKey(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("training data contains a single class")]
    DegenerateLabels,

    #[error("feature vector belongs to a different vocabulary (expected {expected:016x}, got {actual:016x})")]
    VocabularyMismatch { expected: u64, actual: u64 },

    #[error("duplicate prediction for model {model:?}, crash key {crash_key:?}")]
    DuplicatePrediction { model: String, crash_key: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: probability {value} outside [0, 1]")]
    ProbabilityRange { line: usize, value: f64 },

    #[error("no overlapping items")]
    NoOverlap,

    #[error("chance agreement is 1 (observed agreement {p0})")]
    DegenerateMarginals { p0: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("invalid label {0:?}")]
    InvalidLabel(String),

    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),

    #[error("artifact format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable code, used in API responses and CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyNarrative { .. } => "empty_narrative",
            Error::UnknownRoadType(_) => "unknown_road_type",
            Error::DuplicateKey(_) => "duplicate_key",
            Error::EmptyCorpus => "empty_corpus",
            Error::DegenerateLabels => "degenerate_labels",
            Error::VocabularyMismatch { .. } => "vocabulary_mismatch",
            Error::DuplicatePrediction { .. } => "duplicate_prediction",
            Error::Parse { .. } => "parse_error",
            Error::ProbabilityRange { .. } => "probability_range",
            Error::NoOverlap => "no_overlap",
            Error::DegenerateMarginals { .. } => "degenerate_marginals",
            Error::Config(_) => "config_error",
            Error::NotFound(_) => "not_found",
            Error::Rejected(_) => "rejected",
            Error::InvalidLabel(_) => "invalid_label",
            Error::MissingInput(_) => "missing_input",
            Error::Format(_) => "format_error",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
        }
    }
}
