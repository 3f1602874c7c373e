use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("singular resolvent at omega = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("prony: only {found} roots strictly inside the unit disk, {requested} requested")]
    TooFewStableRoots { found: usize, requested: usize },

    #[error("rank-deficient least squares: {0}")]
    RankDeficient(String),

    #[error("all window candidates rejected: {}", .0.join("; "))]
    AllCandidatesRejected(Vec<String>),

    #[error("infeasible inversion: {0}")]
    Infeasible(String),

    #[error("cannot factor J at omega = {omega}: {reason}")]
    NotFactorizable { omega: f64, reason: String },

    #[error("unknown strategy '{name}' (available: {})", .available.join(", "))]
    UnknownStrategy { name: String, available: Vec<String> },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
