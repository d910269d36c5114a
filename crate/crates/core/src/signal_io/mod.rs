//! ECG record input/output: WFDB format 212 signal files, text beat
//! annotations, MIT-BIH symbol grouping and a synthetic ECG generator.

mod annotations;
mod classes;
mod dataset;
mod record;
mod synth;
mod wfdb;

pub use annotations::{read_annotations, write_annotations, Annotation};
pub use classes::{map_symbols_to_classes, AamiClass, ClassSet, NON_BEAT_SYMBOLS};
pub use dataset::{
    read_manifest, read_record_dir, write_manifest, write_record_dir, ManifestEntry, MANIFEST_FILE,
};
pub use record::EcgRecord;
pub use synth::{
    generate_synthetic_record, Deflection, Morphology, SynthesisParams, SyntheticRecord,
    DEFAULT_GAIN, WANDER_HZ,
};
pub use wfdb::{decode_212, encode_212, read_wfdb_record, write_wfdb_record, SAMPLE_MAX, SAMPLE_MIN};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalIoError {
    #[error("header line {line}: {msg}")]
    HeaderParse { line: usize, msg: String },
    #[error("unsupported signal format `{0}` (only 212 is supported)")]
    UnsupportedFormat(String),
    #[error("lead {lead} requested but the record declares {nsig} signal(s)")]
    LeadOutOfRange { lead: usize, nsig: usize },
    #[error("dat length mismatch: expected {expected} bytes, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample {index} has value {value}, outside the 12-bit range [-2048, 2047]")]
    SampleRange { index: usize, value: i32 },
    #[error("annotation line {line}: {msg}")]
    AnnotationParse { line: usize, msg: String },
    #[error("annotation line {line}: index {index} is smaller than the previous index")]
    AnnotationOrder { line: usize, index: usize },
    #[error("annotation line {line}: duplicate index {index}")]
    DuplicateAnnotation { line: usize, index: usize },
    #[error("unknown beat symbol(s): {0:?}")]
    UnknownSymbol(Vec<String>),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid synthesis parameters: {0}")]
    Params(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SignalIoError> = std::result::Result<T, E>;
