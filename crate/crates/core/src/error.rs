use thiserror::Error;

use crate::model::{FlowKey, Violation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("coflow {coflow} lists flow ({input}, {output}) more than once")]
    DuplicateFlow {
        coflow: u32,
        input: u32,
        output: u32,
    },

    #[error("kappa must be positive and finite, got {0}")]
    BadKappa(f64),

    #[error("permutation does not cover coflows 1..={expected}")]
    BadPermutation { expected: usize },

    #[error("assignment references unknown flow {0}")]
    UnknownFlow(FlowKey),

    #[error("flow {0} has no core assignment")]
    UnassignedFlow(FlowKey),

    #[error("flow {flow} assigned to core {core}, outside [1, {cores}]")]
    CoreOutOfRange {
        flow: FlowKey,
        core: u32,
        cores: u32,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("coflow {0} has no completion time")]
    MissingCompletion(u32),

    #[error("degenerate instance: zero dual cost with objective {0}")]
    Degenerate(f64),

    #[error("cannot summarize an empty sample")]
    EmptySample,

    #[error("{0}")]
    Config(String),

    #[error("oracle limit exceeded: {0}")]
    LimitExceeded(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) | Error::DuplicateFlow { .. } => "invalid-instance",
            Error::BadKappa(_) | Error::Config(_) => "config",
            Error::BadPermutation { .. }
            | Error::UnknownFlow(_)
            | Error::UnassignedFlow(_)
            | Error::CoreOutOfRange { .. } => "bad-schedule-input",
            Error::Parse { .. } => "parse",
            Error::MissingCompletion(_) | Error::Degenerate(_) | Error::EmptySample => "metrics",
            Error::LimitExceeded(_) => "limit-exceeded",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
