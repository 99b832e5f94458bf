use std::io;

use thiserror::Error;

/// Errors surfaced by the mapping, control and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("scenario schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
