use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("bisection did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("record {index}: invalid `{field}`: {reason}")]
    InvalidRecord {
        index: usize,
        field: &'static str,
        reason: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("records without a date: {0:?}")]
    MissingDate(Vec<String>),

    #[error("calibration set is empty")]
    EmptyCalibrationSet,

    #[error("certificate is infeasible; no threshold was certified")]
    InfeasibleCertificate,

    #[error("metric undefined: {0}")]
    DegenerateLabels(&'static str),

    #[error("input is empty")]
    EmptyInput,

    #[error("decisions do not match dataset ids: {0}")]
    IdMismatch(String),

    #[error("paired datasets do not share the same id set")]
    UnpairedIds,

    #[error("metric `{metric}` stayed undefined after {attempts} redraws of resample {resample}")]
    MetricUndefined {
        metric: &'static str,
        resample: usize,
        attempts: usize,
    },

    #[error("lambdas must be strictly increasing")]
    UnsortedLambdas,
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
