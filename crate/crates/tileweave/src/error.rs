//! Error taxonomy shared by every module in the engine.

use std::io;

/// Engine-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented constraints.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An input value (volume, extent, grid) is unusable as given.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Dimensions disagree between values that must line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numeric value is NaN/Inf where a finite value is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A merge target cell is covered by no window.
    #[error("incomplete cover: {0}")]
    IncompleteCover(String),

    /// A container file does not carry the expected magic/version.
    #[error("format error: {0}")]
    Format(String),

    /// A container payload length disagrees with its header.
    #[error("length error: {0}")]
    Length(String),

    /// A per-window task failed during a dispatch step.
    #[error("window task {index} failed: {source}")]
    WindowTask {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable category tag, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidInput(_) => "invalid-input",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::IncompleteCover(_) => "incomplete-cover",
            Error::Format(_) => "format",
            Error::Length(_) => "length",
            Error::WindowTask { .. } => "window-task",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
