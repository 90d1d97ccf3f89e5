//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the recovery toolkit.
#[derive(Error, Debug)]
pub enum Error {
    /// Matrix shapes do not conform for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// A linear system has a pivot below the singularity threshold.
    #[error("numerically singular matrix (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },

    /// A matrix expected to be symmetric positive definite is not.
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    /// An iterative kernel failed to converge within its sweep budget.
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    /// Invalid model or experiment parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Non-finite (NaN/Inf) data where finite values are required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A candidate-generation stage produced nothing usable.
    #[error("no usable candidates: {0}")]
    EmptyCandidates(String),

    /// Greedy selection ran out of linearly independent candidates.
    #[error("only {found} independent candidates available, {needed} required")]
    UnderRank { found: usize, needed: usize },

    /// Dictionary reconstruction hit a singular Gram system.
    #[error("dictionary reconstruction failed: {0}")]
    Reconstruction(String),

    /// Data has lower numerical rank than the algorithm requires.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// Repeated draws failed to produce usable random data.
    #[error("data generation failed: {0}")]
    DataGeneration(String),

    /// A statistical check refused to run outside its parameter regime.
    #[error("check precondition violated: {0}")]
    Guard(String),

    /// The LP solver exceeded its iteration budget.
    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    /// The LP solver lost feasibility or boundedness to roundoff.
    #[error("LP numerical failure: {0}")]
    LpNumerical(String),

    /// Malformed CSV fixture.
    #[error("CSV parse error: {0}")]
    CsvParse(String),

    /// I/O error with experiment context.
    #[error("I/O error ({context}): {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}
