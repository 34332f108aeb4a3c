use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at position {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("exponent at position {pos} is not a nonnegative integer literal")]
    NonConstantExponent { pos: usize },
    #[error("division by a non-constant or zero expression at position {pos}")]
    BadDivision { pos: usize },
    #[error("polynomial is not quasi-homogeneous")]
    NotQuasiHomogeneous,
    #[error("weights not unique: the support does not determine them")]
    WeightsNotUnique,
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("truncation tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailBound { bound: f64, tol: f64 },
    #[error("error estimate {estimate:e} above tolerance {tol:e}")]
    ToleranceExceeded { estimate: f64, tol: f64 },
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("requested exponent {requested} needs table order {needed}, have {have}")]
    ExponentBeyondOrder { requested: f64, needed: usize, have: usize },
    #[error("empty fitting band")]
    EmptyBand,
    #[error("weights are not all equal")]
    NonHomogeneous,
}

pub type Result<T> = std::result::Result<T, Error>;
