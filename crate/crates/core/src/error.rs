//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, the solver, and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: String },

    #[error("csv row {row}: {message}")]
    CsvRow { row: usize, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error("dataset needs at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("train_fraction must lie in (0, 1), got {0}")]
    BadTrainFraction(f64),

    #[error("split leaves {train} train / {test} test rows; need train >= 2 and test >= 1")]
    DegenerateSplit { train: usize, test: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "solver did not converge within {pair_updates} pair updates \
         (max KKT violation {max_violation:.3e}); best iterate attached"
    )]
    NonConvergence {
        pair_updates: usize,
        max_violation: f64,
        best: Box<crate::solver::SvrModel>,
    },

    #[error("residuals are all zero; the working likelihood is degenerate")]
    DegenerateResiduals,

    #[error("need at least {min} residuals to estimate (epsilon, s), got {got}")]
    InsufficientSample { min: usize, got: usize },

    #[error("density does not integrate to 1 over the given support (got {0})")]
    BadDensity(f64),

    #[error("no root found in bracket [{lo}, {hi}] (f(lo)={flo:.3e}, f(hi)={fhi:.3e})")]
    NoRoot { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("k-fold cross validation needs 2 <= k <= n, got k={k}, n={n}")]
    BadFoldCount { k: usize, n: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
