use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while building or evaluating problem components.
///
/// Numeric payloads are widened to `f64` so the type does not depend on the
/// scalar in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluating {role} at {at:?}: {source}")]
    Eval {
        role: &'static str,
        at: Vec<f64>,
        #[source]
        source: EvalError,
    },

    #[error("{role} expression uses variable `{name}`; allowed: {allowed}")]
    UnexpectedVariable { role: &'static str, name: String, allowed: &'static str },

    #[error("invalid domain [{lo}, {hi}]")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("{role}: point {value} lies outside [{lo}, {hi}]")]
    OutsideDomain { role: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("{role} returned negative value {value} at {at:?}")]
    NegativeValue { role: &'static str, at: Vec<f64>, value: f64 },

    #[error("{role} is not a self-map: {x} maps to {image}, outside [{lo}, {hi}]")]
    Escape { role: &'static str, x: f64, image: f64, lo: f64, hi: f64 },

    #[error("invalid {parameter}: {message}")]
    InvalidParameter { parameter: &'static str, message: String },

    #[error("family index {index} outside 1..={budget}")]
    IndexOutOfBudget { index: usize, budget: usize },

    #[error("quadrature did not converge on [{a}, {b}] within depth {max_depth}")]
    Quadrature { a: f64, b: f64, max_depth: u32 },

    #[error("metrics are defined on different domains")]
    DomainMismatch,

    #[error("no usable contraction constant: {0}")]
    ContractionConstant(String),
}

impl Error {
    pub(crate) fn param(parameter: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { parameter, message: message.into() }
    }
}
