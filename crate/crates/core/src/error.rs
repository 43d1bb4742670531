use thiserror::Error;

/// Errors raised by the solvers and game model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A game or solver was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A policy or index could not be found.
    #[error("lookup error: {0}")]
    Lookup(String),
    /// Conditioning on a recommendation that the device never makes.
    #[error("conditional distribution undefined: recommendation {0} has zero marginal")]
    UndefinedConditional(usize),
    /// Non-finite data or a numerical routine that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A registered name was not found.
    #[error("unknown game `{0}`")]
    UnknownGame(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
