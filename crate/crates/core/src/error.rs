use thiserror::Error;

use crate::residue::LaurentError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("not preparable: reduction is zero to precision")]
    NotPreparable,
    #[error("evaluation diverges: {0}")]
    Divergent(String),
    #[error("minimal polynomial is not Eisenstein: {0}")]
    NotEisenstein(String),
    #[error("consistency failure: {0}")]
    ConsistencyFailure(String),
    #[error("value is zero to precision {0}")]
    ZeroToPrecision(i64),
    #[error("unit part of a lift is not integral")]
    NonIntegralUnitPart,
    #[error("invalid module: {0}")]
    InvalidModule(String),
    #[error("element is not torsion: {0}")]
    NotTorsion(String),
    #[error("digit {0} cannot be separated at this precision")]
    AmbiguousDigit(usize),
    #[error("identity has no solution: {0}")]
    NotSolvable(String),
    #[error("valuation {got} is below the required {required}")]
    ValuationTooSmall { got: String, required: String },
    #[error("level m = {m} is below the threshold {threshold}")]
    ThresholdNotMet { m: u32, threshold: String },
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
