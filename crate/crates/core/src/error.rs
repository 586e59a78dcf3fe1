use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid loss: {0}")]
    InvalidLoss(String),

    #[error("invalid distribution at {path}: {reason}")]
    InvalidDistribution { path: String, reason: String },

    #[error("conditional is not symmetric: no mirror for atom at label {label}")]
    SymmetryViolation { label: f64 },

    #[error("input {input} is not symmetric: no mirror for atom at label {label}")]
    NotSymmetric { input: String, label: f64 },

    #[error("hypothesis has no prediction for input {0}")]
    MissingPrediction(String),

    #[error("prediction {value} at input {input} exceeds the class bound {bound}")]
    PredictionOutOfBounds { input: String, value: f64, bound: f64 },

    #[error("invalid hypothesis class: {0}")]
    InvalidClass(String),

    #[error("invalid bound specification: {0}")]
    InvalidSpec(String),

    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),

    #[error("premise failed at input {input}: {detail}")]
    PremiseFailed { input: String, detail: String },

    #[error("({x}, {y}) is outside the domain of {lemma}")]
    DomainViolation { lemma: String, x: f64, y: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("solver did not converge in {iters} iterations (last objective {last})", last = trace.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { iters: usize, trace: Vec<f64> },

    #[error("infeasible configuration: {0}")]
    ConfigInfeasible(String),

    #[error("parse error at row {row}, column {column}: {reason}")]
    Parse {
        row: usize,
        column: usize,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
