use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at x = {x:?}, t = {t}")]
    NonFinite { x: Vec<f64>, t: f64, value: f64 },

    #[error("region contains no grid nodes")]
    EmptyRegion,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node {0:?} is too close to the boundary for the stencil")]
    StencilOutOfBounds(Vec<usize>),

    #[error("time step {dt:e} exceeds the monotonicity limit {limit:e}")]
    CflViolated { dt: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("values outside [0, 1]: found {value} at x = {x:?}, t = {t}")]
    OutOfRange { x: Vec<f64>, t: f64, value: f64 },

    /// A precondition of a measure estimate does not hold for the data.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// An internal guarantee of the selection algorithm failed on the data.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("empty contact set: {0}")]
    EmptyContactSet(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Diagnostics about the data (as opposed to misuse or I/O failures).
    pub fn is_diagnostic(&self) -> bool {
        matches!(
            self,
            Error::Hypothesis(_) | Error::Invariant(_) | Error::EmptyContactSet(_)
        )
    }
}
