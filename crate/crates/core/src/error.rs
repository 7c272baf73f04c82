use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported Hilbert-space dimension {0} (supported: 2..=8)")]
    UnsupportedDimension(usize),

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error(
        "generator is not Hermiticity-preserving and trace-annihilating \
         (hermiticity residual {hermiticity_residual:.3e}, trace residual {trace_residual:.3e})"
    )]
    NotHtp {
        hermiticity_residual: f64,
        trace_residual: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: estimated error {error:.3e} after {subdivisions} subdivisions")]
    QuadratureNonConvergence { error: f64, subdivisions: usize },

    #[error("correlation function diverges: {0}")]
    Divergent(String),

    #[error("unsupported bath: {0}")]
    UnsupportedBath(String),

    #[error("perturbative order {order} exceeds the cap {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("time {time} outside the tabulated range [0, {max}] or off the quadrature grid")]
    OutOfRange { time: f64, max: f64 },

    #[error("dynamical map is not invertible at t = {time} (smallest singular value {singular_value:.3e})")]
    MapSingular { time: f64, singular_value: f64 },

    #[error("Fock truncation inadequate: doubling the cutoff changes the map by {deviation:.3e}")]
    TruncationInadequate { deviation: f64 },

    #[error("total Hilbert-space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::Divergent(_)
                | Error::MapSingular { .. }
                | Error::TruncationInadequate { .. }
                | Error::DimensionCap { .. }
        )
    }
}
