use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e}){context}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        context: String,
    },

    #[error("time step {dt:e} s exceeds the stability bound {bound:e} s")]
    Cfl { dt: f64, bound: f64 },

    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    #[error("density not normalized: total mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
