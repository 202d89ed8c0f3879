use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("event is not a union of atoms of the event space")]
    EventNotMeasurable,
    #[error("conditioning event has probability zero")]
    ConditionOnNull,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown value `{value}` for variable `{variable}`")]
    UnknownValue { variable: String, value: String },
    #[error("empty log")]
    EmptyLog,
    #[error("not a measure: {0}")]
    NotAMeasure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("incomplete counterfactual values in row {0}")]
    IncompleteCounterfactuals(usize),
    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),
    #[error("unknown inequality `{0}`")]
    UnknownInequality(String),
    #[error("inconsistent table: {0}")]
    InconsistentTable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
