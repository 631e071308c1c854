use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Power iteration exhausted its budget. Carries the last iterate so
    /// callers can still inspect (or bound) the Rayleigh quotient.
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        eigenvalue: f64,
        eigenvector: Vec<f64>,
    },

    #[error("singular component {component} did not converge")]
    SvdNonConvergence { component: usize },

    #[error("direction undefined for a zero vector")]
    UndefinedDirection,

    #[error("geometry invalid: |zeta| = {zeta} exceeds ||beta|| = {beta_norm}")]
    InvalidGeometry { zeta: f64, beta_norm: f64 },

    #[error("screening selected no coordinates")]
    EmptyScreen,

    #[error("degenerate signal: estimated covariance rho_n is exactly zero")]
    DegenerateSignal,

    #[error("non-finite value at iteration {iteration}")]
    NumericOverflow { iteration: usize },

    #[error("iterate collapsed to the zero vector at iteration {iteration}")]
    DegenerateIterate { iteration: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
