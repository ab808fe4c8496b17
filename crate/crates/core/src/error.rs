use thiserror::Error;

use crate::trial::Party;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trial {trial}: {party:?} setting {index} outside grid 1..={max}")]
    LabelOutOfGrid { trial: u64, party: Party, index: usize, max: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("{what} = {value} outside its domain {domain}")]
    Domain { what: &'static str, value: f64, domain: &'static str },

    #[error("correlation cell ({0},{1}) has no data")]
    MissingCell(usize, usize),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{what}: need at least {need} values, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("strategy rejected: {0}")]
    NonLocal(String),

    #[error("protocol violation at trial {trial}: {detail}")]
    Protocol { trial: u64, detail: String },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
