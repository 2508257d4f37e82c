use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// File system or on-disk format problems.
    Io,
    /// Shape, configuration, or argument problems.
    Invalid,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}: unsupported bit depth {depth} (only 8-bit images are supported)")]
    UnsupportedBitDepth { path: PathBuf, depth: u32 },
    #[error("{path}: unsupported image format")]
    UnsupportedFormat { path: PathBuf },

    #[error("bad magic bytes in weight file (expected \"NTTW\")")]
    BadMagic,
    #[error("unsupported weight file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("weight file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("weight file truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("malformed weight file: {0}")]
    MalformedWeights(String),
    #[error("missing weight tensor \"{0}\"")]
    MissingTensor(String),

    #[error("invalid resampling factor {0}")]
    InvalidFactor(f64),
    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("tap \"{0}\" is not reached by the network configuration")]
    TapNotReached(String),
    #[error("patch of size {size} does not fit a {height}x{width} map")]
    PatchTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },
    #[error("reference {index} is too small for one patch at the matching layer")]
    ReferenceTooSmall { index: usize },
    #[error("every reference patch is degenerate (zero norm) at center ({x}, {y})")]
    AllDegenerate { x: usize, y: usize },
    #[error("strides do not divide: from {from} to {to}")]
    StrideNotDivisible { from: usize, to: usize },
    #[error("image of {height}x{width} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("warp leaves a degenerate valid interior ({height}x{width})")]
    DegenerateWarp { height: usize, width: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Decode { .. }
            | Error::UnsupportedBitDepth { .. }
            | Error::UnsupportedFormat { .. }
            | Error::BadMagic
            | Error::VersionMismatch { .. }
            | Error::Checksum { .. }
            | Error::Truncated { .. }
            | Error::MalformedWeights(_) => ErrorKind::Io,
            _ => ErrorKind::Invalid,
        }
    }
}
