//! File formats: 16-bit PCM WAV audio, binary PGM images, JSONL session
//! logs, and the cross-run parity comparison over logs.

mod log;
mod parity;
mod pgm;
mod wav;

use thiserror::Error;

use crate::dsp::DspError;

pub use log::{read_session, write_session, LogHeader, LogWriter, SessionLog, TickRow};
pub use parity::{compare_runs, ParityReport, NUMERIC_FIELDS};
pub use pgm::{encode_pgm, load_pgm, parse_pgm, write_pgm};
pub use wav::{load_wav, read_wav, save_wav, write_wav};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    SchemaMismatch { line: usize, reason: String },
    #[error("field {0:?} is not a numeric row field")]
    FieldMissing(String),
    #[error("the two logs share no tick where both define the field")]
    NoOverlap,
    #[error(transparent)]
    Samples(#[from] DspError),
}

impl IoError {
    pub fn reason(&self) -> &'static str {
        match self {
            IoError::Io(_) => "io",
            IoError::UnsupportedFormat(_) => "unsupported_format",
            IoError::CorruptHeader(_) => "corrupt_header",
            IoError::TruncatedData { .. } => "truncated_data",
            IoError::SchemaMismatch { .. } => "schema_mismatch",
            IoError::FieldMissing(_) => "field_missing",
            IoError::NoOverlap => "no_overlap",
            IoError::Samples(_) => "bad_samples",
        }
    }
}
