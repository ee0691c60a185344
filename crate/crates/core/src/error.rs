use thiserror::Error;

/// Errors produced by the gate-simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown basis label `{0}`")]
    UnknownBasis(String),

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("matrix is not Hermitian: max deviation {dev:.3e} (tolerance {tol:.3e})")]
    NotHermitian { dev: f64, tol: f64 },

    #[error("matrix is not unitary: max deviation {dev:.3e} (tolerance {tol:.3e})")]
    NotUnitary { dev: f64, tol: f64 },

    #[error("quadrature did not converge: element changed by {delta_hz:.3e} Hz between orders")]
    QuadratureNotConverged { delta_hz: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("species table parse error: {0}")]
    SpeciesTable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
