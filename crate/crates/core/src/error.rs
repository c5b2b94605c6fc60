use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An integrand produced a non-finite value at a quadrature node.
    #[error("non-finite integrand value {value} at node {node}")]
    Evaluation { node: String, value: String },

    #[error("singular point: {0}")]
    SingularPoint(String),

    /// The discretized problem is numerically degenerate. `monomials` names
    /// the basis elements responsible, when they can be identified.
    #[error("numerical degeneracy: {reason}{}", fmt_monomials(.monomials))]
    Degenerate {
        reason: String,
        monomials: Vec<String>,
    },

    #[error("non-integrable configuration: {0}")]
    NonIntegrable(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn fmt_monomials(m: &[String]) -> String {
    if m.is_empty() {
        String::new()
    } else {
        format!(" (offending monomials: {})", m.join(", "))
    }
}

impl Error {
    pub fn degenerate(reason: impl Into<String>) -> Self {
        Error::Degenerate {
            reason: reason.into(),
            monomials: Vec::new(),
        }
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. } | Error::NonIntegrable(_) | Error::Evaluation { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
