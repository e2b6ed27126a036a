use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by mesh handling, quadrature, assembly and the eigensolver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("malformed mesh file: {0}")]
    Parse(String),

    #[error("kernel evaluated at coincident points")]
    SingularEvaluation,

    #[error("unsupported quadrature order {order}; supported orders are 1..=20")]
    UnsupportedOrder { order: usize },

    #[error("non-finite kernel value on panel pair ({test}, {trial})")]
    NonFinite { test: usize, trial: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular (pivot magnitude {pivot:.3e})")]
    SingularMatrix { pivot: f64 },

    #[error(
        "F(z) is singular at contour node z = {z} (pivot {pivot:.3e}); the contour passes \
         through or very close to an eigenvalue, move or resize the contour"
    )]
    ContourHitsEigenvalue { z: Complex64, pivot: f64 },

    #[error(
        "probe block too small: detected rank {rank} equals the probe count {probes}; \
         rerun with more probes"
    )]
    ProbeTooSmall { rank: usize, probes: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
