use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RuntimeError>;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("shape fault in {op}: {detail}")]
    ShapeFault { op: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("dimension mismatch: declared {declared:?}, found {found:?}")]
    DimensionMismatch {
        declared: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("operation `{0}` has no CPU kernel (analysis only)")]
    Unsupported(&'static str),

    #[error("memory pool exhausted: requested {requested} bytes with {in_use} of {cap} in use")]
    PoolExhausted {
        requested: usize,
        in_use: usize,
        cap: usize,
    },
}

impl RuntimeError {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        RuntimeError::ShapeFault {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RuntimeError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        RuntimeError::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
