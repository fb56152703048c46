use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure reading or writing one of the file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error(transparent)]
    Core(#[from] manipseg_core::Error),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<FormatError>,
    },
}

impl FormatError {
    pub fn malformed(msg: impl Into<String>) -> Self {
        FormatError::Malformed(msg.into())
    }

    pub fn at(self, path: &Path) -> Self {
        match self {
            e @ FormatError::File { .. } => e,
            e => FormatError::File {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// True when the underlying cause is a missing file.
    pub fn is_not_found(&self) -> bool {
        match self {
            FormatError::Io(e) => e.kind() == io::ErrorKind::NotFound,
            FormatError::File { source, .. } => source.is_not_found(),
            _ => false,
        }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;
