use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size {size}: {what} must be at least {min}")]
    InvalidSize {
        what: &'static str,
        size: usize,
        min: usize,
    },

    #[error("data length {found} does not match declared shape (expected {expected})")]
    LengthMismatch { expected: usize, found: usize },

    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },

    #[error("sample value {value} at index {index} is outside the valid range")]
    ValueOutOfRange { index: usize, value: f32 },

    #[error("image is empty")]
    EmptyImage,

    #[error("image too small for {what}: {height}x{width}, need at least {min}x{min}")]
    ImageTooSmall {
        what: &'static str,
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("bad magic bytes {0:?}, expected \"SEPW\"")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("unexpected tensor `{0}`")]
    UnknownTensor(String),

    #[error("tensor `{0}` is quantized; a float tensor is required here")]
    NotFloat(String),

    #[error("non-finite activation after {0}")]
    NonFinite(String),

    #[error("context vector has length {found}, expected {expected}")]
    ContextLength { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by the filesystem or by malformed files rather
    /// than by the model contents.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::BadMagic(_)
                | Error::UnsupportedVersion(_)
                | Error::Truncated(_)
                | Error::Manifest(_)
                | Error::Parse { .. }
        )
    }
}
