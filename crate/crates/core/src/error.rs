use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A map sent a point outside the carrier.
    #[error("range error: T_{index}({input}) = {value} lies outside the carrier")]
    Range { index: u64, input: f64, value: f64 },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("hypothesis violated at index {index}: {message}")]
    Hypothesis { index: u64, message: String },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("certificate unavailable: {0}")]
    Certificate(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("at (x={x}, y={y}, i={i}, j={j}): {source}")]
    AtTuple {
        x: f64,
        y: f64,
        i: u64,
        j: u64,
        source: Box<Error>,
    },

    #[error("at step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

/// Broad failure classes, used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input (scenario, expression, flags) is malformed or violates a precondition.
    Invalid,
    /// Evaluation failed on well-formed input.
    Numerical,
}

impl Error {
    /// Strips tuple/step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTuple { source, .. } | Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Parse { .. }
            | Error::InvalidSpace(_)
            | Error::Usage(_)
            | Error::Hypothesis { .. }
            | Error::Scenario(_) => ErrorClass::Invalid,
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn at_tuple(self, x: f64, y: f64, i: u64, j: u64) -> Error {
        Error::AtTuple {
            x,
            y,
            i,
            j,
            source: Box::new(self),
        }
    }
}
