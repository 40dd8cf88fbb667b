use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("window shorter than one tick period")]
    WindowTooShort,
    #[error("no computation recorded")]
    NoComputation,
    #[error("empty samples")]
    EmptySamples,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("csv parse error at line {line}: {reason}")]
    CsvParse { line: usize, reason: String },
    #[error("truncated frame at byte offset {offset}")]
    TruncatedFrame { offset: usize },
    #[error("bad frame length {len} at byte offset {offset}")]
    BadFrameLength { len: u32, offset: usize },
}
