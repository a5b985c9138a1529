use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("WrongShape: expected {expected}, got {actual}")]
    WrongShape { expected: String, actual: String },

    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),

    #[error("NonFinite: entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("InvalidMask: entry {index} is {value}, expected 0 or 1")]
    InvalidMask { index: usize, value: u8 },

    #[error("BadMagic: expected \"FGLV\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("UnsupportedVersion: {0}")]
    UnsupportedVersion(u32),

    #[error("DimMismatch: {0}")]
    DimMismatch(String),

    #[error("TruncatedPayload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("InvalidSchedule: {0}")]
    InvalidSchedule(String),

    #[error("OddDimension: {axis} has length {len}")]
    OddDimension { axis: &'static str, len: usize },

    #[error("InvalidBand: band width {0} must be even and at least 2")]
    InvalidBand(usize),

    #[error("BandTooWide: band width {band} does not fit inside {axis} length {len}")]
    BandTooWide { axis: &'static str, band: usize, len: usize },

    #[error("InvalidOverlap: overlap {overlap} must be smaller than tile {tile}")]
    InvalidOverlap { overlap: usize, tile: usize },

    #[error("InvalidScale: {0} (expected 2 or 4)")]
    InvalidScale(usize),

    #[error("InvalidParam: {0}")]
    InvalidParam(String),

    #[error("DegenerateIntrinsics: fx={fx}, fy={fy}")]
    DegenerateIntrinsics { fx: f64, fy: f64 },

    #[error("NonDivisibleShape: {axis} length {len} is not a multiple of {factor}")]
    NonDivisibleShape { axis: &'static str, len: usize, factor: usize },

    #[error("EmptyKeyList")]
    EmptyKeyList,

    #[error("InvalidKind: {0}")]
    InvalidKind(String),

    #[error("TooFewFrames: {frames} (need at least {min})")]
    TooFewFrames { frames: usize, min: usize },

    #[error("EmptyImage")]
    EmptyImage,

    #[error("MissingScore: {0}")]
    MissingScore(String),

    #[error("MalformedTask: {0}")]
    MalformedTask(String),

    #[error("EmptyBatch")]
    EmptyBatch,

    #[error("IncompleteCaptionSet: missing {0}")]
    IncompleteCaptionSet(&'static str),

    #[error("TooShort: {frames} frames (need at least {min})")]
    TooShort { frames: usize, min: usize },

    #[error("OneStyleMissing: no {0} records")]
    OneStyleMissing(&'static str),

    #[error("NotImplemented: {0}")]
    NotImplemented(&'static str),

    #[error("Parse: {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("Image: {0}")]
    Image(#[from] image::ImageError),

    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("Io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether this error came from the filesystem or from decoding an
    /// external file rather than from validating an argument.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Image(_))
    }
}
