use thiserror::Error;

use crate::C64;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state representation mismatch: {0}")]
    Representation(String),

    #[error("degenerate eigenpair at lambda = {lambda}: |<phi, phi*>| = {magnitude:e}")]
    Degenerate { lambda: C64, magnitude: f64 },

    #[error("simplicity violation: eigenvalues {a} and {b} are {distance:e} apart")]
    Simplicity { a: C64, b: C64, distance: f64 },

    #[error("incomplete root search: argument principle counted {counted}, refined {found}")]
    IncompleteSearch { counted: usize, found: usize },

    #[error("root on contour could not be avoided after {retries} retries")]
    RootOnContour { retries: usize },

    #[error("{0} is not an adjoint eigenvalue (residual {1:e})")]
    NotAdjointEigenvalue(C64, f64),

    #[error("{0} lies within {1:e} of a reference eigenvalue")]
    PoleProximity(C64, f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gap undefined: {0}")]
    GapUndefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
