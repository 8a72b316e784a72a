use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("capacity exceeded: {requested} nodes requested, limit is {limit}")]
    Capacity { requested: usize, limit: usize },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("banded solve failed: {0}")]
    Solve(String),
    #[error("step h = {h} exceeds the stability bound {h_max}")]
    Stability { h: f64, h_max: f64 },
    #[error("matrix norm {norm:.3e} exceeds the exponential cap {cap:.3e}")]
    Overflow { norm: f64, cap: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{context}: {source}")]
    Run { context: String, source: Box<Error> },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attaches the run that failed, keeping the underlying kind for exit codes.
    pub fn in_run(self, context: impl Into<String>) -> Self {
        Error::Run { context: context.into(), source: Box::new(self) }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Run { source, .. } => source.exit_code(),
            Error::Domain(_) => 2,
            Error::Convergence { .. } => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
