use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or corrupt PNG: {0}")]
    Png(String),

    #[error("unsupported PNG bit depth {0} (only 8-bit images are accepted)")]
    BitDepth(u8),

    #[error("invalid PFM: {0}")]
    Pfm(String),

    #[error("malformed box at line {line}: {reason}")]
    BoxSyntax { line: usize, reason: String },

    #[error("empty box at line {0}")]
    EmptyBox(usize),

    #[error("box {index} ({x_min},{y_min},{x_max},{y_max}) outside {width}x{height} image")]
    BoxOutOfBounds {
        index: usize,
        x_min: usize,
        y_min: usize,
        x_max: usize,
        y_max: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid config at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "dimension mismatch: {what} is {found_w}x{found_h}, expected {expected_w}x{expected_h}"
    )]
    DimensionMismatch {
        what: String,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("sample of {size} points is smaller than {components} components")]
    SampleTooSmall { size: usize, components: usize },

    #[error("no foreground evidence: no agreed foreground pixel and every patch was skipped")]
    NoForegroundEvidence,

    #[error("fixed assignment violated at pixel ({x},{y})")]
    FixedViolation { x: usize, y: usize },

    #[error("brute-force solver limited to {cap} free pixels, problem has {free}")]
    TooManyFreePixels { free: usize, cap: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unpaired file: no counterpart for {0}")]
    Unpaired(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(
        what: impl Into<String>,
        expected: (usize, usize),
        found: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected_w: expected.0,
            expected_h: expected.1,
            found_w: found.0,
            found_h: found.1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
