use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: n_max = {0} (need n_max >= 1)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("Liouvillian has {count} eigenvalues within {tol:e} of zero; the steady state is not unique")]
    MultipleSteadyStates { count: usize, tol: f64 },

    #[error("two-component fit not applicable: {0}")]
    FitNotApplicable(String),

    #[error("time step too large: total jump probability {probability:.4} exceeds {limit} (reduce dt)")]
    StepTooLarge { probability: f64, limit: f64 },

    #[error("integration failure at t = {time}: {reason} (try a smaller dt)")]
    IntegrationFailure { time: f64, reason: String },

    #[error("trajectory {trajectory} (seed {seed}) failed: {source}")]
    Trajectory {
        seed: u64,
        trajectory: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
