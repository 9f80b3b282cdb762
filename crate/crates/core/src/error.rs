use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid model: {}", summarize(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid information structure: {}", summarize(.0))]
    InvalidInfo(Vec<Violation>),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("zero-probability observation: {0}")]
    ZeroProbabilityObservation(String),

    #[error("prescription undefined on part of the belief support: {0}")]
    DomainGap(String),

    #[error("missing key: {0}")]
    MissingKey(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("agent 1 observation is not the identity on its state: {0}")]
    PerfectObsViolation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{}: {}", v.path, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
