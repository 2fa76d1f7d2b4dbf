use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("dimension mismatch for {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("label id {id} out of range in {what} (dataset has {classes} classes)")]
    LabelOutOfRange { what: String, id: u16, classes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty {0}")]
    Empty(String),

    #[error("fusion weight denominator is zero for classifier {classifier}, class {class}")]
    ZeroDenominator { classifier: usize, class: usize },

    #[error("classifier {classifier} has nonzero weight for class {class} but does not cover it")]
    UncoveredScore { classifier: usize, class: usize },

    #[error("version mismatch in {what}: expected {expected}, found {found}")]
    Version { what: String, expected: u32, found: u32 },

    #[error("feature layout hash mismatch: expected {expected:016x}, found {found:016x}")]
    FeatureHash { expected: u64, found: u64 },

    #[error("image {image}: {source}")]
    Image {
        image: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn in_image(self, image: impl Into<String>) -> Self {
        Error::Image {
            image: image.into(),
            source: Box::new(self),
        }
    }
}
