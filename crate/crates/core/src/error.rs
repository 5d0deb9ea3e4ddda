use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration fields are invalid. Every problem found is
    /// listed, not only the first.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{what} index {index} out of range (len {len})")]
    Range {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("field of {height}x{width} is smaller than pooling stride {stride}")]
    Size { height: usize, width: usize, stride: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid field data: {0}")]
    InvalidData(String),

    #[error("collinearity dynamics did not converge within {steps} steps (residual {residual:.3e})")]
    NotConverged { steps: usize, residual: f64 },

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

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
