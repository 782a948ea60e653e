use thiserror::Error;

use crate::system::Freq;

#[derive(Debug, Error)]
pub enum Error {
    /// A declarative document failed validation. `field` is a dotted path
    /// into the document.
    #[error("invalid spec at `{field}`: {reason}")]
    Spec { field: String, reason: String },

    #[error("arity mismatch: expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("point outside the declared space: {0}")]
    OutsideSpace(String),

    #[error("map applied beyond constructed depth {depth}")]
    DepthExceeded { depth: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parameters are not exact rationals; digit streams agree through stage {agree_through}")]
    Undecidable { agree_through: usize },

    #[error("construction rejected: invariance fails for character {character}")]
    Rejected { character: Freq },

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("unknown {what} `{name}` (known: {known})")]
    Unknown {
        what: &'static str,
        name: String,
        known: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Spec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Errors caused by the input documents rather than the environment.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Overflow(_))
    }

    /// Prefixes the field path of a spec error, leaving other variants alone.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Spec { field, reason } => Error::Spec {
                field: if field.is_empty() {
                    prefix.to_string()
                } else {
                    format!("{prefix}.{field}")
                },
                reason,
            },
            other => other,
        }
    }
}
