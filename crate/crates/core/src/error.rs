//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by landscape computations, chain construction, solvers and I/O.
#[derive(Debug, Error)]
pub enum CwpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("degenerate temperature: {0}")]
    DegenerateTemperature(String),
    #[error("unexpected eigen-structure: {0}")]
    EigenStructure(String),
    #[error("definiteness violated: {0}")]
    Definiteness(String),
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("descending path stuck: {0}")]
    PathStuck(String),
    #[error("empty valley: {0}")]
    EmptyValley(String),
    #[error("invalid margin: {0}")]
    InvalidMargin(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("reversibility violated: {0}")]
    Reversibility(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CwpError>;

impl CwpError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CwpError::Capacity(_) => 3,
            CwpError::InvalidParameter(_)
            | CwpError::UnsupportedRegime(_)
            | CwpError::DegenerateTemperature(_)
            | CwpError::InvalidMargin(_) => 2,
            _ => 1,
        }
    }
}
