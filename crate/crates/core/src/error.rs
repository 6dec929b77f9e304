use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transversal dimension {0} (expected 1 or 2)")]
    InvalidDimension(usize),
    #[error("insufficient quadrature: need at least {need} nodes, got {got}")]
    InsufficientQuadrature { need: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative order {0}")]
    NegativeOrder(i32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),
    #[error("boundary decay violated: edge/peak ratio {ratio:.3e} exceeds {limit:.1e}")]
    BoundaryDecay { ratio: f64, limit: f64 },
    #[error("spectral decay violated: top-quarter Hermite mass fraction {fraction:.3e} exceeds {limit:.1e}")]
    SpectralDecay { fraction: f64, limit: f64 },
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("time mismatch: {0} vs {1}")]
    TimeMismatch(f64, f64),
    #[error("ray-map inversion did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular ray-map jacobian: det = {det:.3e}")]
    SingularJacobian { det: f64 },
    #[error("caustic reached at t = {t}")]
    CausticReached { t: f64 },
    #[error("insufficient theta samples: need at least {need}, got {got}")]
    InsufficientThetaSamples { need: usize, got: usize },
    #[error("operation unsupported for transversal dimension {0}")]
    UnsupportedDimension(usize),
    #[error("time step {dt:.4e} exceeds stability cap {cap:.4e}")]
    DtCap { dt: f64, cap: f64 },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("non-positive input: {0}")]
    NonPositive(String),
    #[error("at least {need} points required, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("study cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: std::sync::Arc<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (caustics, step caps, decay checks)
    /// as opposed to usage or I/O problems.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::BoundaryDecay { .. }
            | Error::SpectralDecay { .. }
            | Error::NoConvergence { .. }
            | Error::SingularJacobian { .. }
            | Error::CausticReached { .. }
            | Error::DtCap { .. } => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
