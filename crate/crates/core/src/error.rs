use thiserror::Error;

use crate::model::Violation;

/// Errors raised by the search, relaxation and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid process: {}", format_violations(.0))]
    InvalidProcess(Vec<Violation>),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("policy does not match process: {0}")]
    PolicyMismatch(String),

    #[error("process is not a bandit: state {state} has {actions} actions")]
    NotBandit { state: usize, actions: usize },

    #[error("{what} exceeds limit of {limit}")]
    SizeLimit { what: &'static str, limit: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
