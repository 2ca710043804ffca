use std::fmt;

use thiserror::Error;

/// One violated invariant found while validating a scenario or config.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending user index, when the problem is user-scoped.
    pub user: Option<usize>,
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn global(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            user: None,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn user(user: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            user: Some(user),
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.user {
            Some(k) => write!(f, "user {k}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "closed form requested for K0 = {k0} above the stability cap {cap}; \
         use the quadrature method or raise the cap"
    )]
    ClosedFormCap { k0: u64, cap: u64 },

    #[error("closed form did not converge within {bits} bits of working precision")]
    PrecisionExhausted { bits: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    /// All violations carried by a validation error, empty otherwise.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::Validation(v) => v,
            _ => &[],
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
