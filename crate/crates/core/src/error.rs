use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid scene metadata: {0}")]
    Metadata(String),

    #[error("payload holds {actual} samples, metadata expects {expected}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("duplicate band label `{0}`")]
    DuplicateBand(String),

    #[error("band `{0}` not present in scene")]
    UnknownBand(String),

    #[error("invalid sample {value} at index {index} (not finite and not nodata)")]
    InvalidSample { index: usize, value: f32 },

    #[error("raster shape mismatch: {0}")]
    Shape(String),

    #[error("invalid training data: {0}")]
    Training(String),

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error("class `{class}` has {count} samples, fewer than k={k} folds")]
    ClassTooSmall {
        class: String,
        count: usize,
        k: usize,
    },

    #[error("expected {expected} features, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("non-finite feature value at position {0}")]
    NonFinite(usize),

    #[error("feature names differ: model expects {expected:?}, stack has {actual:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },

    #[error("unsupported model format_version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("class id {0} has no palette entry")]
    Palette(u8),

    #[error("image encoding failed: {0}")]
    Encode(String),

    #[error("AOI `{0}` already exists")]
    DuplicateAoi(String),

    #[error("unknown AOI `{0}`")]
    UnknownAoi(String),

    #[error("unknown alert `{0}`")]
    UnknownAlert(String),

    #[error("scene `{scene_id}` already ingested for AOI `{aoi_id}`")]
    DuplicateScene { aoi_id: String, scene_id: String },

    #[error("scene `{scene_id}` acquired at {acquired_at} predates the latest observation of AOI `{aoi_id}`")]
    StaleScene {
        aoi_id: String,
        scene_id: String,
        acquired_at: String,
    },

    #[error("invalid AOI: {0}")]
    InvalidAoi(String),

    #[error("no observations yet for AOI `{0}`")]
    NoObservations(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure stems from bad input rather than the environment.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Encode(_) => false,
            _ => true,
        }
    }
}
