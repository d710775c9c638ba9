use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Two operands whose shapes must agree do not.
    #[error("dimension mismatch in {operand}: expected {expected}, found {found}")]
    Dimension {
        operand: String,
        expected: String,
        found: String,
    },

    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("channel {channel}: {source}")]
    Channel {
        channel: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed or invalid file content. `line` is 1-based for line-oriented formats.
    #[error("{}", match .line { Some(l) => format!("format error at line {l}: {msg}"), None => format!("format error: {msg}") })]
    Format { line: Option<usize>, msg: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(
        operand: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::Dimension {
            operand: operand.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn in_layer(self, index: usize) -> Self {
        Error::Layer {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_channel(self, channel: usize) -> Self {
        Error::Channel {
            channel,
            source: Box::new(self),
        }
    }

    /// Strips `Layer` / `Channel` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Layer { source, .. } | Error::Channel { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the CLI: 1 usage/config, 2 I/O or format, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 1,
            Error::Io(_) | Error::Format { .. } | Error::NotFound(_) | Error::Dimension { .. } => 2,
            Error::Domain(_) | Error::Numeric(_) => 3,
            Error::Layer { .. } | Error::Channel { .. } => unreachable!("root() unwraps context"),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::format(e.to_string())
    }
}
