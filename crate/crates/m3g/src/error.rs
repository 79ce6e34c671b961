use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// so the CLI can emit single-line, grep-able failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate out of range: lon={lon}, lat={lat}")]
    InvalidCoordinate { lon: f64, lat: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("duplicate neighborhood id `{0}`")]
    DuplicateId(String),

    #[error("neighborhood `{0}` has no polygon but polygon assignment was requested")]
    MissingPolygon(String),

    #[error("invalid polygon for `{id}`: {reason}")]
    InvalidPolygon { id: String, reason: String },

    #[error("coincident centroids for `{a}` and `{b}`")]
    CoincidentCentroids { a: String, b: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("anchor {anchor} has no context under modality `{modality}`")]
    NoContext { anchor: usize, modality: String },

    #[error("empty negative set for anchor {anchor} under modality `{modality}`")]
    EmptyNegativeSet { anchor: usize, modality: String },

    #[error("modality `{0}` not present in graph")]
    UnknownModality(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("constant target: {0} is undefined")]
    ConstantTarget(String),

    #[error("singular system; retry with ridge lambda > 0")]
    SingularSystem,

    #[error("k ({k}) exceeds number of samples ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable upper-case code for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCoordinate { .. } => "INVALID_COORDINATE",
            Error::EmptyInput(_) => "EMPTY_INPUT",
            Error::DuplicateId(_) => "DUPLICATE_ID",
            Error::MissingPolygon(_) => "MISSING_POLYGON",
            Error::InvalidPolygon { .. } => "INVALID_POLYGON",
            Error::CoincidentCentroids { .. } => "COINCIDENT_CENTROIDS",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::NoContext { .. } => "NO_CONTEXT",
            Error::EmptyNegativeSet { .. } => "EMPTY_NEGATIVE_SET",
            Error::UnknownModality(_) => "UNKNOWN_MODALITY",
            Error::UnknownToken(_) => "UNKNOWN_TOKEN",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::NonFinite(_) => "NON_FINITE",
            Error::ConstantTarget(_) => "CONSTANT_TARGET",
            Error::SingularSystem => "SINGULAR_SYSTEM",
            Error::KTooLarge { .. } => "K_TOO_LARGE",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::Parse { .. } => "PARSE",
            Error::Config(_) => "CONFIG",
            Error::Io(_) => "IO",
            Error::Csv(_) => "CSV",
            Error::Json(_) => "JSON",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
