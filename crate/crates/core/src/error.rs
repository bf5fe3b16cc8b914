use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The eigenvalue vector lies outside the admissible cone, or a quotient
    /// denominator vanished.
    #[error("cone violation: {0}")]
    ConeViolation(String),

    #[error("invalid curvature spec: {0}")]
    InvalidSpec(String),

    #[error("envelope minimization failed: {0}")]
    Envelope(String),

    #[error("stencil out of range at cell {0:?}")]
    StencilOutOfRange(Vec<usize>),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time step {dt:e} exceeds the CFL bound {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value produced at cell {cell:?}")]
    NonFinite { cell: Vec<usize> },

    #[error("stationary solve did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("invalid domain mask: {0}")]
    InvalidMask(String),

    #[error("shape does not fit inside radius S = {radius}: {detail}")]
    ShapeTooLarge { radius: f64, detail: String },

    #[error("degenerate front: all {0} samples skipped")]
    DegenerateFront(usize),

    #[error("non-positive speed {0} at front sample")]
    NonPositiveSpeed(f64),

    #[error("empty front")]
    EmptyFront,

    #[error("snapshot mismatch: {0}")]
    SnapshotMismatch(String),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
