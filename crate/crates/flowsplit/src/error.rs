use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("not a .flo file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error(".flo data is truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error(".flo data has {0} trailing bytes")]
    TrailingBytes(u64),
    #[error("flow value at ({x}, {y}) is not finite")]
    NonFinite { x: usize, y: usize },
    #[error("need at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index} is {width}x{height}, expected {expected_width}x{expected_height}")]
    DimensionMismatch {
        index: usize,
        width: u32,
        height: u32,
        expected_width: u32,
        expected_height: u32,
    },
    #[error("{path}: unsupported pixel format {format} (8 or 16 bit grayscale only)")]
    UnsupportedFormat { path: PathBuf, format: String },
    #[error("slices differ in size: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("malformed manifest line {line}: {text:?}")]
    Manifest { line: usize, text: String },
    #[error(transparent)]
    Core(#[from] flowsplit_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
