// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

use crate::gan::GanModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: String, detail: String },

    #[error("parse error at row {row}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("training produced a non-finite objective at step {step}")]
    Diverged { step: usize, last_good: Box<GanModel> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code: 2 validation, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_)
            | Error::Validation(_)
            | Error::Parse { .. }
            | Error::Version { .. }
            | Error::Corrupt(_) => 2,
            Error::Numeric { .. } | Error::Diverged { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}
