use std::fmt;

use pseudomode::Error;

/// A failed run, carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Infeasible(String),
    Numerical { module: &'static str, message: String },
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Numerical { .. } => 4,
        }
    }

    /// Classifies a library error raised while running `module`.
    pub fn from_library(module: &'static str, e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::UnknownStrategy { .. } => Failure::Config(format!("{module}: {e}")),
            Error::Infeasible(_) => Failure::Infeasible(format!("{module}: {e}")),
            other => Failure::Numerical { module, message: other.to_string() },
        }
    }

    pub fn io(module: &'static str, what: &str, e: impl fmt::Display) -> Self {
        Failure::Numerical { module, message: format!("{what}: {e}") }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Infeasible(m) => write!(f, "infeasible inversion: {m}"),
            Failure::Numerical { module, message } => write!(f, "numerical failure in {module}: {message}"),
        }
    }
}
