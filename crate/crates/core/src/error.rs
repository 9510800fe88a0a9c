use thiserror::Error;

/// Errors raised by the lattice engine, the problem catalog and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("von Neumann bound violated: r = {r} > 1, shrink the time step")]
    StabilityViolation { r: f64 },

    #[error("root search could not bracket a solution on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("point x = {x} lies outside the liquid domain [0, {s}]")]
    DomainError { x: f64, s: f64 },

    #[error("source term is singular at t = {t}; evaluate from the first time step on")]
    SingularTime { t: f64 },

    #[error("unknown parameter set `{0}`")]
    UnknownCase(String),

    #[error("front node index {index} leaves too few active lattice sites")]
    TooFewSites { index: usize },

    #[error("tridiagonal pivot {pivot:e} at row {row} is numerically singular")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFiniteValue(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("error entry {index} is not positive ({value})")]
    NonPositiveError { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("particle count {0} exceeds the supported range")]
    CountOverflow(u128),

    #[error("particle ledger out of balance: expected {expected}, found {actual}")]
    LedgerMismatch { expected: i128, actual: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
