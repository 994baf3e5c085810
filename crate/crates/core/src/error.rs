use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// (rows, cols)
pub type Shape = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left is {}x{}, right is {}x{}", .left.0, .left.1, .right.0, .right.1)]
    Shape {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    /// One or more configuration or input violations, all reported at once.
    #[error("invalid input: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// The caller broke an API contract (wrong trace, softmax derivative, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {actual:#010x}")]
    Magic {
        path: PathBuf,
        expected: u32,
        actual: u32,
    },

    #[error("truncated IDX file {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    Pairing { images: usize, labels: usize },

    #[error("missing dataset files in {dir}: expected {}", .expected.join(", "))]
    MissingData { dir: PathBuf, expected: Vec<String> },

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(vec![msg.into()])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
