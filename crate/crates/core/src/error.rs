use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by estimation, sampling and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid tail levels: beta={beta}, beta0={beta0} (need 0 < beta <= beta0 < 1)")]
    InvalidLevels { beta: f64, beta0: f64 },

    #[error("order statistic index {k} out of range for {n} values")]
    IndexOutOfRange { k: usize, n: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("too few tail observations: n={n}, level={level} leaves {count} (need at least {required})")]
    InsufficientTail {
        n: usize,
        level: f64,
        count: usize,
        required: usize,
    },

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("CVaR is infinite for tail index alpha={alpha} (need alpha > 1)")]
    InfiniteCvar { alpha: f64 },

    #[error("Hill estimator needs positive top order statistics, found {value}")]
    NonPositiveTail { value: f64 },

    #[error("density vanishes at the sampled point; the IS density does not dominate")]
    ZeroDensity,

    #[error("model has no joint density; importance sampling needs one")]
    DensityUnavailable,

    #[error("no feasible base level among candidates {candidates:?}")]
    NoFeasibleCandidate { candidates: Vec<f64> },

    #[error("empty file")]
    EmptyFile,

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell at line {line}, column {column}: {value:?}")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable, machine-parsable category used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidLevels { .. }
            | Error::IndexOutOfRange { .. }
            | Error::EmptySample => "input",
            Error::InsufficientTail { .. }
            | Error::InfiniteCvar { .. }
            | Error::NonPositiveTail { .. }
            | Error::ZeroDensity
            | Error::DensityUnavailable
            | Error::NoFeasibleCandidate { .. } => "estimation",
            Error::NotPositiveDefinite => "model",
            Error::EmptyFile | Error::RaggedRow { .. } | Error::NonNumeric { .. } | Error::Csv(_) => {
                "parse"
            }
            Error::Config(_) | Error::Json(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
