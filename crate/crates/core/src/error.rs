use thiserror::Error;

use crate::solvers::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("input contains a NaN or infinite entry")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The solver hit its sweep limit. The boxed fit holds the best iterate.
    #[error("coordinate descent did not converge within {} sweeps", .0.iterations)]
    NoConvergence(Box<FitResult>),

    #[error("d must lie in [0, 1], got {0}")]
    BadD(f64),

    #[error("gamma {gamma} makes the coordinate subproblem non-convex (curvature {curvature})")]
    BadGamma { gamma: f64, curvature: f64 },

    #[error("design restricted to support {0:?} is rank deficient")]
    RankDeficient(Vec<usize>),

    #[error("no lambda selects exactly {k} variables; closest cardinality is {closest}")]
    Unachievable {
        k: usize,
        closest: usize,
        lambda: f64,
        fit: Box<FitResult>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("price panel is empty")]
    EmptyPanel,

    #[error("dates are not strictly increasing at line {0}")]
    NonMonotoneDates(usize),

    #[error("series of length {len} is too short for windows of {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
