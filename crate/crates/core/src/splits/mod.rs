//! Annotation ingestion, train/val split generators, and the synthetic
//! trajectory corpus.

mod generators;
mod schema;
mod synthetic;

pub use generators::{
    frequent_objects, make_compositional, make_fewshot, make_oneclass, make_shuffled, SplitStats,
    DEFAULT_FREQUENT_THRESHOLD,
};
pub use schema::{
    load_annotations, read_jsonl, write_jsonl, AnnotatedVideo, AppearanceRecord, FewShotSpec,
    FrameBoxes, PredictionRecord, SchemaHeader, SplitFile, SplitSpec, TrackletEntry,
    TrackletRecord, ANNOTATIONS_SCHEMA, APPEARANCE_SCHEMA, PREDICTIONS_SCHEMA, SCHEMA_VERSION,
    SPLIT_SCHEMA, TRACKLETS_SCHEMA,
};
pub use synthetic::{generate_synthetic, MotionVerb, SynthSpec};

use thiserror::Error;

/// Errors raised while reading, validating, or partitioning data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing or malformed schema header on line 1: {msg}")]
    Header { path: String, msg: String },
    #[error("{path}: schema {got:?} where {want:?} was expected")]
    WrongSchema { path: String, got: String, want: String },
    #[error("{path}: unsupported schema version {got} (supported: {supported})")]
    Version { path: String, got: u32, supported: u32 },
    #[error("{path}:{line}: {msg}")]
    Json { path: String, line: usize, msg: String },
    #[error("video {video_id:?}: field {field}: {msg}")]
    Invalid {
        video_id: String,
        field: &'static str,
        msg: String,
    },
    #[error("duplicate video_id {0:?}")]
    DuplicateVideo(String),
    #[error("split infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, DataError>;
